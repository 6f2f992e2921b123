"""Regenerate src/latentcanvas/canvas/glyphs.py from a monospaced TrueType font.

Needs Pillow; the package itself never imports it. Usage:

    python scripts/build_font.py /usr/share/fonts/truetype/dejavu/DejaVuSansMono.ttf
"""
import sys

from PIL import Image, ImageDraw, ImageFont

CELL_W, CELL_H = 8, 16


def main(path, size=14, threshold=110):
    font = ImageFont.truetype(path, size)
    rows = {}
    for code in range(32, 127):
        im = Image.new("L", (CELL_W, CELL_H), 0)
        ImageDraw.Draw(im).text((0, -1), chr(code), fill=255, font=font)
        bits = []
        for y in range(CELL_H):
            byte = 0
            for x in range(CELL_W):
                if im.getpixel((x, y)) >= threshold:
                    byte |= 0x80 >> x
            bits.append(byte)
        rows[code] = bytes(bits).hex()
    out = ['"""8x16 monospaced bitmap glyphs for printable ASCII (generated by scripts/build_font.py)."""', "",
           "GLYPH_W = 8", "GLYPH_H = 16", "", "# one hex string per code point: 16 rows, MSB = leftmost pixel", "GLYPHS_HEX = {"]
    for code, hx in rows.items():
        out.append(f"    {code}: \"{hx}\",  # {chr(code)!r}")
    out.append("}")
    print("\n".join(out))


if __name__ == "__main__":
    main(sys.argv[1])
