import sys
from functools import reduce

values = [int(x) for x in sys.stdin.read().split()]
print(reduce(lambda a, b: a + b, values, 0))
