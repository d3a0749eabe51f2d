//! Run the full probe battery on one system and print the verdict for every
//! operator class, exactly as `transferlab classify` reports it.
//!
//!     cargo run --release --example classify_system

use transferlab::classify::{classify, ClassTag, ClassifyConfig};
use transferlab::gallery::gallery_entry;

fn main() -> transferlab::Result<()> {
    let entry = gallery_entry("additive_pinned_zero")?;
    println!("system: {} — {}", entry.id, entry.notes);

    let config = ClassifyConfig { ladder: vec![32, 64, 128], ..ClassifyConfig::default() };
    let report = classify(&entry.system, entry.id, &config)?;

    println!("ladder: {:?}, hierarchy consistent: {}", report.ladder, report.hierarchy_ok);
    println!("{:<10} {:<18} expected", "class", "verdict");
    for tag in ClassTag::all() {
        let got = report.verdict_of(tag);
        let want = entry
            .expected
            .get(&tag)
            .map(|v| v.as_str())
            .unwrap_or("(unspecified)");
        println!("{:<10} {:<18} {want}", tag.as_str(), got.as_str());
    }

    // Certificates carry the numbers behind each verdict; here the Doeblin
    // probe records both the fired fixed-point rule and the flat matrix rows.
    let d = report.probes.iter().find(|p| p.class_tag == ClassTag::D).unwrap();
    println!("\n(D) certificate:\n{}", serde_json::to_string_pretty(&d.certificate).unwrap());
    Ok(())
}
