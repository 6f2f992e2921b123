"""8x16 monospaced bitmap glyphs for printable ASCII (generated by scripts/build_font.py)."""

GLYPH_W = 8
GLYPH_H = 16

# one hex string per code point: 16 rows, MSB = leftmost pixel
GLYPHS_HEX = {
    32: "00000000000000000000000000000000",  # ' '
    33: "00001818181818080000181800000000",  # '!'
    34: "00003434343400000000000000000000",  # '"'
    35: "00001a12127f3424ff2c684800000000",  # '#'
    36: "0008083c6a68283c0a0b4a3c08080000",  # '$'
    37: "000070d898730c304609090600000000",  # '%'
    38: "00003c2020307059cdc7663f00000000",  # '&'
    39: "00000808080800000000000000000000",  # "'"
    40: "00040808181010101018080804000000",  # '('
    41: "0010101808080c0c0808181010000000",  # ')'
    42: "0000084a1c1c4a080000000000000000",  # '*'
    43: "000000000808087f0808080000000000",  # '+'
    44: "00000000000000000000181818100000",  # ','
    45: "00000000000000003c00000000000000",  # '-'
    46: "00000000000000000000181800000000",  # '.'
    47: "00000206040c08081810302060400000",  # '/'
    48: "00003c266242435b4262263c00000000",  # '0'
    49: "00001828080808080808083f00000000",  # '1'
    50: "00003c460202060c1830607e00000000",  # '2'
    51: "00003c4602061c060202463c00000000",  # '3'
    52: "00000c0c143424447f04040400000000",  # '4'
    53: "00007e60607c46020202463c00000000",  # '5'
    54: "00001c3260407c666363263c00000000",  # '6'
    55: "00007e0206040c0c0818103000000000",  # '7'
    56: "00003c6662663c664343663c00000000",  # '8'
    57: "00003c664242673f0202063c00000000",  # '9'
    58: "00000000001818000000181800000000",  # ':'
    59: "00000000001818000000181818100000",  # ';'
    60: "00000000030e7860780e030000000000",  # '<'
    61: "00000000007f00007f00000000000000",  # '='
    62: "0000000040700e030e70400000000000",  # '>'
    63: "00003c2602060c181800181800000000",  # '?'
    64: "00001e2341cf9b91919b4f40301e0000",  # '@'
    65: "0000181c143426267e4243c100000000",  # 'A'
    66: "00007c6262667c626363627e00000000",  # 'B'
    67: "00001e32606040406060321e00000000",  # 'C'
    68: "00007c46424243434242467c00000000",  # 'D'
    69: "00007e6060607e606060607f00000000",  # 'E'
    70: "00003f2020203e202020202000000000",  # 'F'
    71: "00001e32604040474363231e00000000",  # 'G'
    72: "0000434343437f434343434300000000",  # 'H'
    73: "00007e18181818181818187e00000000",  # 'I'
    74: "00003e060606060606044c7800000000",  # 'J'
    75: "000043464c5878684c46424300000000",  # 'K'
    76: "00006060606060606060607f00000000",  # 'L'
    77: "0000636767575b5b4343434300000000",  # 'M'
    78: "0000636373535b4b4b47474700000000",  # 'N'
    79: "00003c66624343434362663c00000000",  # 'O'
    80: "00007e626363627e6060606000000000",  # 'P'
    81: "00003c66624343434362663c06020000",  # 'Q'
    82: "00007c464242467c4642434100000000",  # 'R'
    83: "00003c624060380e0203463c00000000",  # 'S'
    84: "0000ff18181818181818181800000000",  # 'T'
    85: "00004242424242424242663c00000000",  # 'U'
    86: "0000c3436262262434141c1800000000",  # 'V'
    87: "000081c1c1d95b5f5776666600000000",  # 'W'
    88: "00004362361c181c342662c300000000",  # 'X'
    89: "0000c36226341c181818181800000000",  # 'Y'
    90: "00007f0306040c181030607f00000000",  # 'Z'
    91: "001c101010101010101010101c000000",  # '['
    92: "000040602030101808080c0406020000",  # '\\'
    93: "00380808080808080808080838000000",  # ']'
    94: "0000183c264300000000000000000000",  # '^'
    95: "0000000000000000000000000000ff00",  # '_'
    96: "30100800000000000000000000000000",  # '`'
    97: "000000003c46023e6242663a00000000",  # 'a'
    98: "006060607c6662636362667c00000000",  # 'b'
    99: "000000001e3020606020301e00000000",  # 'c'
    100: "000202023a6642424242663a00000000",  # 'd'
    101: "000000003c22437f4060221e00000000",  # 'e'
    102: "000e18187e1818181818181800000000",  # 'f'
    103: "000000003e6642424242663e02263c00",  # 'g'
    104: "006060607c6662626262626200000000",  # 'h'
    105: "00080800380808080808087f00000000",  # 'i'
    106: "00080800380808080808080808087800",  # 'j'
    107: "00202020222428382c26222300000000",  # 'k'
    108: "00701010101010101010180e00000000",  # 'l'
    109: "000000007e5b49494949494900000000",  # 'm'
    110: "000000007c6662626262626200000000",  # 'n'
    111: "000000003c6662434362663c00000000",  # 'o'
    112: "000000007c6662636362667c60606000",  # 'p'
    113: "000000003a6662424262663a02020200",  # 'q'
    114: "000000003f3830303030303000000000",  # 'r'
    115: "000000003c2260380e02463c00000000",  # 's'
    116: "000010107e1010101010180e00000000",  # 't'
    117: "00000000626262626262263a00000000",  # 'u'
    118: "000000004362622634341c1800000000",  # 'v'
    119: "0000000081c1d95b5a76662600000000",  # 'w'
    120: "0000000062261c181834264300000000",  # 'x'
    121: "0000000043622226341c1c1818107000",  # 'y'
    122: "000000007e0604081830207e00000000",  # 'z'
    123: "000e08080808187018080808080e0000",  # '{'
    124: "00080808080808080808080808080800",  # '|'
    125: "007018181818080e0818181818700000",  # '}'
    126: "00000000000000790e00000000000000",  # '~'
}
