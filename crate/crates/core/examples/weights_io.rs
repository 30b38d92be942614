//! Weight files: save, load against an expected spec, detect mismatches,
//! and swap the classifier for a new class count.
//!
//!     cargo run --example weights_io

use senet::model::{load_weights, ModelSpec, SenetModel};

fn main() -> senet::Result<()> {
    let path = std::env::temp_dir().join("senet-weights-demo.bin");
    let spec = ModelSpec::desk_scale(5);
    let model = SenetModel::<f32>::build(&spec, 42)?;
    model.save_weights(&path)?;
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0));

    let file = load_weights(&path)?;
    println!("spec fingerprint {}", file.spec.fingerprint().0);
    for (name, p) in file.params.iter().take(4) {
        println!("  {name:<24} {:?}", p.tensor.dims());
    }
    println!("  … {} tensors, digest {}", file.params.len(), &file.params.digest()[..16]);

    let other = ModelSpec { fc_units: 64, ..spec.clone() };
    match SenetModel::<f32>::load(&path, &other) {
        Ok(_) => println!("unexpected: mismatched spec loaded"),
        Err(e) => println!("mismatch refused ({}): {e}", e.class().tag()),
    }

    let resized = SenetModel::<f32>::load(&path, &spec)?.replace_classifier(3, 7)?;
    println!(
        "classifier now {:?}, {} parameters",
        resized.params().tensor("classifier/weight")?.dims(),
        resized.params().total_count()
    );
    Ok(())
}
