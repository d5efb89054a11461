#!/usr/bin/env python3
"""Regenerates src/font_atlas_data.inc from DejaVu Sans Mono.

Each printable ASCII glyph is rendered at a 32 px em into a fixed cell and
stored as 8-bit coverage. The atlas backs the built-in monospace face.
"""
import argparse
from PIL import Image, ImageDraw, ImageFont

EM = 32
CELL_W = 21

def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--font", default="/usr/share/fonts/truetype/dejavu/DejaVuSansMono.ttf")
    ap.add_argument("--out", default="src/font_atlas_data.inc")
    args = ap.parse_args()

    font = ImageFont.truetype(args.font, EM)
    ascent, descent = font.getmetrics()
    cell_h = ascent + descent
    advance = font.getlength("M")
    lines = [
        "// Generated by tools/gen_font_atlas.py from DejaVu Sans Mono. Do not edit.",
        f"constexpr int kAtlasEm = {EM};",
        f"constexpr int kAtlasCellWidth = {CELL_W};",
        f"constexpr int kAtlasCellHeight = {cell_h};",
        f"constexpr int kAtlasAscent = {ascent};",
        f"constexpr double kAtlasAdvance = {advance!r};",
        "constexpr int kAtlasFirstChar = 32;",
        "constexpr int kAtlasLastChar = 126;",
        "constexpr unsigned char kAtlasCoverage[] = {",
    ]
    for code in range(32, 127):
        img = Image.new("L", (CELL_W, cell_h), 0)
        ImageDraw.Draw(img).text((0, 0), chr(code), font=font, fill=255)
        data = img.tobytes()
        for i in range(0, len(data), 32):
            lines.append("    " + ",".join(str(b) for b in data[i:i + 32]) + ",")
    lines.append("};")
    with open(args.out, "w") as f:
        f.write("\n".join(lines) + "\n")

if __name__ == "__main__":
    main()
