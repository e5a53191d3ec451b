#!/usr/bin/env python3
"""Generate the checked-in fixture levels under crates/levelblend/fixtures.

Deterministic: re-running reproduces the same files byte for byte.
"""
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "crates" / "levelblend" / "fixtures"

# ---------------------------------------------------------------- zelda

def zelda_room(rng, label):
    up, down, left, right = label
    g = [["W"] * 16 for _ in range(11)]
    for r in range(2, 9):
        for c in range(2, 14):
            g[r][c] = "F"
    if up:
        for r, c in [(0, 7), (0, 8), (1, 7), (1, 8)]:
            g[r][c] = "D"
    if down:
        for r, c in [(9, 7), (9, 8), (10, 7), (10, 8)]:
            g[r][c] = "D"
    if left:
        for r, c in [(4, 0), (4, 1), (5, 0), (5, 1)]:
            g[r][c] = "D"
    if right:
        for r, c in [(4, 14), (4, 15), (5, 14), (5, 15)]:
            g[r][c] = "D"
    # interior decoration away from the door lanes
    for _ in range(rng.randint(2, 5)):
        r = rng.randint(3, 7)
        c = rng.randint(3, 12)
        g[r][c] = rng.choice("BMOPI")
    return g


def zelda_dungeon(rng, labels, blank_slots=()):
    rooms = []
    for i, label in enumerate(labels):
        if i in blank_slots:
            rooms.append([["-"] * 16 for _ in range(11)])
        else:
            rooms.append(zelda_room(rng, label))
    cols = 4
    rows = (len(rooms) + cols - 1) // cols
    while len(rooms) < rows * cols:
        rooms.append([["-"] * 16 for _ in range(11)])
    lines = []
    for br in range(rows):
        for r in range(11):
            lines.append("".join("".join(rooms[br * cols + bc][r]) for bc in range(cols)))
    return "\n".join(lines) + "\n"


def all_labels():
    out = []
    for i in range(16):
        out.append(((i >> 0) & 1, (i >> 1) & 1, (i >> 2) & 1, (i >> 3) & 1))
    return out


# ------------------------------------------------------- metroid / megaman

def platform_segment(rng, label, filler, decorations):
    up, down, left, right = label
    g = [[filler] * 16 for _ in range(15)]

    def carve(r, c):
        g[r][c] = "-"

    if left or right:
        for r in range(6, 10):
            for c in range(0 if left else 3, 16 if right else 13):
                carve(r, c)
    if up or down:
        for c in range(6, 10):
            for r in range(0 if up else 4, 15 if down else 11):
                carve(r, c)
    if (left or right) and (up or down):
        # join the bands
        for r in range(6, 10):
            for c in range(6, 10):
                carve(r, c)
    if not any(label):
        # interior chamber, sealed borders
        for r in range(4, 11):
            for c in range(4, 12):
                carve(r, c)
    for _ in range(rng.randint(2, 4)):
        r = rng.randint(5, 9)
        c = rng.randint(4, 11)
        if g[r][c] == "-":
            g[r][c] = rng.choice(decorations)
    return g


def platform_level(rng, labels, filler, decorations, cols=4):
    segs = [platform_segment(rng, l, filler, decorations) for l in labels]
    rows = (len(segs) + cols - 1) // cols
    while len(segs) < rows * cols:
        segs.append([[filler] * 16 for _ in range(15)])
    lines = []
    for br in range(rows):
        for r in range(15):
            lines.append("".join("".join(segs[br * cols + bc][r]) for bc in range(cols)))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ lode runner

def loderunner_level(rng):
    g = [["."] * 32 for _ in range(22)]
    # ground
    for c in range(32):
        g[21][c] = "B"
    # platforms of diggable brick with ladders
    for _ in range(rng.randint(5, 7)):
        r = rng.randint(3, 19)
        c0 = rng.randint(0, 20)
        length = rng.randint(5, 11)
        for c in range(c0, min(32, c0 + length)):
            g[r][c] = "b"
        lc = min(31, c0 + rng.randint(0, length - 1))
        for rr in range(r, 22):
            if g[rr][lc] in (".", "b"):
                g[rr][lc] = "#"
    # a rope
    r = rng.randint(2, 8)
    for c in range(rng.randint(0, 8), rng.randint(20, 31)):
        if g[r][c] == ".":
            g[r][c] = "-"
    for _ in range(rng.randint(4, 8)):
        r, c = rng.randint(2, 20), rng.randint(0, 31)
        if g[r][c] == ".":
            g[r][c] = "G"
    for _ in range(rng.randint(1, 3)):
        r, c = rng.randint(2, 20), rng.randint(0, 31)
        if g[r][c] == ".":
            g[r][c] = "E"
    g[20][rng.randint(0, 31)] = "M"
    return "\n".join("".join(row) for row in g) + "\n"


def write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(path)


def main():
    rng = random.Random(20260823)

    labels16 = all_labels()
    write(ROOT / "zelda" / "dungeon1.txt", zelda_dungeon(rng, labels16))
    write(ROOT / "zelda" / "dungeon2.txt", zelda_dungeon(rng, labels16))
    # dungeon3 has two unused (void) room slots
    write(
        ROOT / "zelda" / "dungeon3.txt",
        zelda_dungeon(rng, labels16 + [labels16[5], labels16[10]], blank_slots=(3, 12)),
    )

    # metroid: corridors, shafts, junctions, dead ends, one sealed chamber
    met_labels = [
        (0, 0, 1, 1), (0, 0, 1, 1), (1, 1, 0, 0), (1, 1, 0, 0),
        (1, 1, 1, 1), (0, 0, 0, 1), (0, 0, 1, 0), (0, 1, 1, 1),
    ]
    for i in range(3):
        write(
            ROOT / "metroid" / f"zone{i + 1}.txt",
            platform_level(rng, met_labels, "#", "E+^B"),
        )
    # sidecar overriding one segment label of zone1: the first corridor
    # also connects upward in the source game
    write(
        ROOT / "metroid" / "zone1.labels",
        "# manual label fixes\nzone1 0 0 1,0,1,1\n",
    )

    mm_labels = [
        (0, 0, 1, 1), (0, 0, 1, 1), (1, 1, 0, 0), (0, 1, 0, 1),
        (1, 0, 1, 0), (0, 0, 1, 1), (1, 1, 0, 0), (0, 0, 0, 0),
    ]
    for i in range(3):
        write(
            ROOT / "megaman" / f"stage{i + 1}.txt",
            platform_level(rng, mm_labels, "B", "H+CL"),
        )

    for i in range(6):
        write(ROOT / "loderunner" / f"level{i + 1}.txt", loderunner_level(rng))


if __name__ == "__main__":
    main()
