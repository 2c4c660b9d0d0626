//! Kill-injection helper: rewrites one file with alternating payloads in
//! a tight loop until killed. The parent asserts the file never holds a
//! partial payload.

use std::path::PathBuf;

fn main() {
    let path = PathBuf::from(
        std::env::args()
            .nth(1)
            .expect("usage: atomic-writer <target-path>"),
    );
    let payload_a = vec![0xAAu8; 256 * 1024];
    let payload_b = vec![0xBBu8; 256 * 1024];
    loop {
        token_core::write_token_file(&path, &payload_a).expect("write a");
        token_core::write_token_file(&path, &payload_b).expect("write b");
    }
}
