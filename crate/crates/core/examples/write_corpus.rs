//! Writes the built-in instances as JSON game files.
//!
//! Usage: `cargo run -p asymgame --example write_corpus -- <dir>`

use std::path::PathBuf;

use asymgame::instances::{
    delayed_sharing_forgetful, full_information, matching_pennies, one_sided_corpus, random_two_sided,
};
use asymgame::model::{game_to_json, one_sided_to_json};
use serde_json::Value;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "corpus".into()));
    std::fs::create_dir_all(&dir)?;
    let mut files: Vec<(String, Value)> = vec![("matching-pennies".into(), one_sided_to_json(&matching_pennies()))];
    files.extend(one_sided_corpus().into_iter().map(|(n, g)| (n, one_sided_to_json(&g))));
    files.extend((0..5).map(|s| (format!("two-sided-{s}"), game_to_json(&random_two_sided(s)))));
    files.push(("forgetful".into(), game_to_json(&delayed_sharing_forgetful())));
    files.push(("full-information".into(), game_to_json(&full_information(1, 2))));
    for (name, v) in files {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&v).expect("serializable") + "\n")?;
        println!("{}", path.display());
    }
    Ok(())
}
