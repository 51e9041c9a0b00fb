//! Built-in 5x7 bitmap font for the 36 recognizable symbols.
//!
//! Each glyph is 7 rows of 5 bits, bit 4 = leftmost column. Letters use
//! capital letterforms; '0' carries an inner diagonal so it stays distinct
//! from 'o'.

pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;

/// Rows for charset index 0..35 (a-z then 0-9).
pub const FONT_5X7: [[u8; 7]; 36] = [
    // a
    [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
    // b
    [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
    // c
    [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
    // d
    [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
    // e
    [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
    // f
    [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
    // g
    [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0E],
    // h
    [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
    // i
    [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
    // j
    [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
    // k
    [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
    // l
    [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
    // m
    [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
    // n
    [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
    // o
    [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
    // p
    [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
    // q
    [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
    // r
    [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
    // s
    [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
    // t
    [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
    // u
    [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
    // v
    [0x11, 0x11, 0x11, 0x11, 0x0A, 0x0A, 0x04],
    // w
    [0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11],
    // x
    [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
    // y
    [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04],
    // z
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
    // 0
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
    // 1
    [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
    // 2
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
    // 3
    [0x0E, 0x11, 0x01, 0x06, 0x01, 0x11, 0x0E],
    // 4
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
    // 5
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
    // 6
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
    // 7
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
    // 8
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
    // 9
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
];

/// Whether the font pixel at (row, col) of charset index `glyph` is set.
pub fn glyph_pixel(glyph: usize, row: usize, col: usize) -> bool {
    debug_assert!(glyph < 36 && row < GLYPH_H && col < GLYPH_W);
    FONT_5X7[glyph][row] & (1 << (GLYPH_W - 1 - col)) != 0
}
