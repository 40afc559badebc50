"""Regenerate src/evalkit/data/t2s_chars.tsv from OpenCC's TSCharacters.txt.

Usage: python scripts/build_t2s_table.py path/to/TSCharacters.txt

Keeps single-character entries in the CJK Unified Ideographs block, takes the
first simplified candidate, and resolves chains so the mapping is idempotent.
"""

import sys
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "evalkit" / "data" / "t2s_chars.tsv"


def cjk(ch):
    return len(ch) == 1 and 0x4E00 <= ord(ch) <= 0x9FFF


def main(src):
    table = {}
    for line in Path(src).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        trad, simp = line.split("\t")
        simp = simp.split()[0]
        if cjk(trad) and cjk(simp) and trad != simp:
            table[trad] = simp
    for k in list(table):
        seen = {k}
        v = table[k]
        while v in table and v not in seen:
            seen.add(v)
            v = table[v]
        table[k] = v
    table = {k: v for k, v in table.items() if k != v}
    lines = [f"{k}\t{v}" for k, v in sorted(table.items())]
    OUT.write_text("# traditional\tsimplified (single characters, from OpenCC TSCharacters, Apache-2.0)\n"
                   + "\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} entries to {OUT}")


if __name__ == "__main__":
    main(sys.argv[1])
