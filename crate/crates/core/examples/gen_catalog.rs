//! Regenerates `data/shapes.jsonl` from the outline builders.
//!
//! cargo run -p vfhand --example gen_catalog > crates/core/data/shapes.jsonl

fn main() {
    print!("{}", vfhand::geometry::write_catalog(&vfhand::geometry::generate_builtin_catalog()));
}
