//! The full-size architecture: per-stage shapes and parameter counts, with
//! and without SE blocks.
//!
//!     cargo run --example model_shapes

use senet::model::{ModelSpec, SenetModel};

fn main() -> senet::Result<()> {
    let spec = ModelSpec::full(23);
    println!("input {}×{}×{}", spec.height, spec.width, spec.channels);
    for (i, (stage, shape)) in spec.stages.iter().zip(spec.shape_chain()?).enumerate() {
        let [ch, cw, cf] = shape.conv;
        let [ph, pw, pf] = shape.pooled;
        println!(
            "stage {}: {f} filters {k}×{k} → conv {ch}×{cw}×{cf} → pool {ph}×{pw}×{pf}",
            i + 1,
            f = stage.filters,
            k = stage.kernel_size
        );
    }
    println!("flatten {}", spec.flatten_width()?);

    for se in [true, false] {
        let spec = ModelSpec { se_blocks: se, ..spec.clone() };
        let model = SenetModel::<f32>::build(&spec, 0)?;
        println!(
            "SE {:<5} {} parameters ({} trainable), fingerprint {}",
            se,
            model.params().total_count(),
            model.params().trainable_count(),
            &spec.fingerprint().0[..12]
        );
    }
    Ok(())
}
