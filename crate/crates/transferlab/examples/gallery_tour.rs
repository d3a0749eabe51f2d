//! Walk the bundled system gallery: every entry, what it is, and which
//! operator classes it is expected to land in.
//!
//!     cargo run --example gallery_tour

use transferlab::classify::ClassTag;
use transferlab::gallery::list_gallery;

fn main() {
    for entry in list_gallery() {
        let flag = if entry.exploratory { " [exploratory]" } else { "" };
        println!("{}{flag}", entry.id);
        println!("    {}", entry.notes);
        let marks: Vec<String> = ClassTag::all()
            .into_iter()
            .filter_map(|t| {
                entry.expected.get(&t).map(|v| format!("{}:{}", t.as_str(), v.as_str()))
            })
            .collect();
        if !marks.is_empty() {
            println!("    expected: {}", marks.join("  "));
        }
    }
}
