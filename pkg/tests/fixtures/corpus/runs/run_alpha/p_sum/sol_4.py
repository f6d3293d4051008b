import sys

values = sys.stdin.read().split()
print(sum(int(x) for x in values) + undefined_name)
