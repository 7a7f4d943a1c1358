#!/usr/bin/env python3
"""Convert a discrete BIF network into the HUGIN .net subset read by cptrank.

Usage: bif2net.py input.bif [output.net]

Parent order in each potential follows the BIF header. Data is written with the
last parent varying fastest and child states innermost, nested one level of
parentheses per parent.
"""
import itertools
import re
import sys

VAR_RE = re.compile(r"variable\s+(\S+)\s*\{\s*type\s+discrete\s*\[\s*(\d+)\s*\]\s*\{([^}]*)\}", re.S)
PROB_RE = re.compile(r"probability\s*\(\s*([^|)]+?)\s*(?:\|\s*([^)]*))?\)\s*\{(.*?)\}", re.S)
ROW_RE = re.compile(r"\(([^)]*)\)\s*([^;]*);")
TABLE_RE = re.compile(r"table\s+([^;]*);")


def split_list(s):
    return [t.strip() for t in s.split(",") if t.strip()]


def numbers(s):
    return [float(t) for t in re.split(r"[,\s]+", s.strip()) if t]


def fmt(x):
    return repr(float(x)) if x != int(x) else str(int(x))


def nest(values, shape):
    if not shape:
        return "(" + " ".join(fmt(v) for v in values) + ")"
    step = len(values) // shape[0]
    parts = [nest(values[i * step:(i + 1) * step], shape[1:]) for i in range(shape[0])]
    return "(" + " ".join(parts) + ")"


def convert(text, name):
    states = {}
    order = []
    for m in VAR_RE.finditer(text):
        var, card, labels = m.group(1), int(m.group(2)), split_list(m.group(3))
        assert len(labels) == card, var
        states[var] = labels
        order.append(var)

    out = ["% converted from BIF: " + name, "net", "{", "}", ""]
    for var in order:
        quoted = " ".join('"%s"' % s for s in states[var])
        out += ["node %s" % var, "{", '    label = "%s";' % var, "    states = (%s);" % quoted, "}", ""]

    for m in PROB_RE.finditer(text):
        child = m.group(1).strip()
        parents = split_list(m.group(2) or "")
        body = m.group(3)
        nc = len(states[child])
        pcards = [len(states[p]) for p in parents]
        data = [None] * (nc * (1 if not pcards else __import__("math").prod(pcards)))
        t = TABLE_RE.search(body)
        if t:
            # BIF `table` lists the first parent slowest, child slowest of all
            vals = numbers(t.group(1))
            shape = [nc] + pcards
            for idx in itertools.product(*[range(n) for n in shape]):
                flat_bif = 0
                for d, i in zip(shape, idx):
                    flat_bif = flat_bif * d + i
                c, pidx = idx[0], idx[1:]
                flat = 0
                for d, i in zip(pcards, pidx):
                    flat = flat * d + i
                data[flat * nc + c] = vals[flat_bif]
        for row in ROW_RE.finditer(body):
            labels = split_list(row.group(1))
            vals = numbers(row.group(2))
            assert len(labels) == len(parents) and len(vals) == nc, (child, labels)
            flat = 0
            for p, lab in zip(parents, labels):
                flat = flat * len(states[p]) + states[p].index(lab)
            data[flat * nc:(flat + 1) * nc] = vals
        assert all(v is not None for v in data), child
        header = child if not parents else child + " | " + " ".join(parents)
        out += ["potential ( %s )" % header, "{", "    data = %s;" % nest(data, pcards), "}", ""]
    return "\n".join(out)


def main():
    src = sys.argv[1]
    with open(src) as f:
        text = f.read()
    result = convert(text, src.rsplit("/", 1)[-1])
    if len(sys.argv) > 2:
        with open(sys.argv[2], "w") as f:
            f.write(result)
    else:
        sys.stdout.write(result)


if __name__ == "__main__":
    main()
