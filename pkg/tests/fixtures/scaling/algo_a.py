import sys

CANON = {}
for code in range(32, 127):
    ch = chr(code)
    CANON[ch] = ch.lower() if ch.isalpha() else ch

def canonical(token):
    return "".join(CANON[c] for c in token)

def dedupe(values):
    seen = set()
    out = []
    for v in values:
        key = canonical(v)
        if key not in seen:
            seen.add(key)
            out.append(v)
    return out

def main():
    values = sys.stdin.read().split()
    print(" ".join(dedupe(values)))

main()
