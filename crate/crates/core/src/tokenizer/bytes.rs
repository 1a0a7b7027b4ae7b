//! The reversible byte → printable-character table used by byte-level BPE.
//!
//! Printable ASCII and most of Latin-1 map to themselves; the remaining 68
//! byte values are shifted into the range starting at U+0100 in byte order.

pub(crate) fn byte_encoder() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut shifted = 0u32;
    for byte in 0u32..256 {
        let direct = matches!(byte, 0x21..=0x7E | 0xA1..=0xAC | 0xAE..=0xFF);
        let cp = if direct {
            byte
        } else {
            shifted += 1;
            255 + shifted
        };
        table[byte as usize] = char::from_u32(cp).expect("codepoints below U+0200 are valid");
    }
    table
}
