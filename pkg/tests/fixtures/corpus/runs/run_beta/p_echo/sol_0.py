import sys

lines = sys.stdin.readlines()
sys.stdout.write("".join(lines))
