import sys

def main():
    total = 0
    for token in sys.stdin.read().split():
        total += int(token)
    print(total)

main()
