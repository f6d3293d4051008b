def classify(n):
    try:
        if n < 0:
            raise ValueError("negative")
    except ValueError:
        return "neg"
    return "pos" if n else "zero"

def stream(limit):
    k = 0
    while k < limit:
        yield classify(k - 1)
        k += 1

print("".join(stream(3)))
