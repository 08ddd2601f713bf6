//! Regenerates the binary tensors bundled under `fixtures/sim/`.
//!
//! The weights, input image and thresholds for the `sim-tiny` network are
//! drawn from a fixed-seed generator, so rerunning this example reproduces
//! the checked-in files byte for byte:
//!
//! ```text
//! cargo run -p streamfold --example make_sim_fixtures
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use streamfold::{
    affine_thresholds, render_threshold_sets, Encoding, NetworkTopology, QTensor, QuantSpec,
};

fn random_codes(rng: &mut ChaCha8Rng, len: usize, bits: u8) -> Vec<u64> {
    (0..len).map(|_| rng.gen_range(0..(1u64 << bits))).collect()
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/sim");
    let topo = NetworkTopology::load(&dir.join("sim-tiny.topo")).expect("fixture topology");

    let mut rng = ChaCha8Rng::seed_from_u64(0x5f01);
    let mut threshold_sets = Vec::new();
    for (pos, (_, layer)) in topo.weighted_layers().enumerate() {
        let dims = [layer.c_out, layer.c, layer.k, layer.k];
        let len = dims.iter().product::<u32>() as usize;
        let enc = if layer.w_bits == 1 {
            Encoding::Bipolar
        } else {
            Encoding::TwosComplement
        };
        let codes = random_codes(&mut rng, len, layer.w_bits);
        let w = QTensor::from_codes(&dims, layer.w_bits, enc, &codes).expect("weight tensor");
        let path = dir.join(format!("layer{pos}.qtns"));
        w.save(&path).expect("write weights");
        println!("wrote {}", path.display());

        // Per-channel affine pre-activations with scales sized to the layer's
        // accumulator range, so the threshold bins all get used.
        let spec = QuantSpec::new(2).expect("2-bit spec");
        let simd_total = u64::from(layer.k) * u64::from(layer.k) * u64::from(layer.c);
        let params: Vec<(f64, f64)> = (0..layer.c_out)
            .map(|_| {
                let scale = rng.gen_range(0.3..1.2) / simd_total as f64;
                let bias = rng.gen_range(-0.2..0.4);
                (scale, bias)
            })
            .collect();
        threshold_sets
            .push(affine_thresholds(&spec, &params, simd_total).expect("threshold set"));
    }

    let thr_path = dir.join("thresholds.toml");
    std::fs::write(&thr_path, render_threshold_sets(&threshold_sets)).expect("write thresholds");
    println!("wrote {}", thr_path.display());

    let in_dims = [topo.input.height, topo.input.width, topo.input.channels];
    let len = in_dims.iter().product::<u32>() as usize;
    let codes = random_codes(&mut rng, len, topo.input.bits);
    let image = QTensor::from_codes(&in_dims, topo.input.bits, Encoding::UnsignedLevel, &codes)
        .expect("input tensor");
    let in_path = dir.join("input.qtns");
    image.save(&in_path).expect("write input");
    println!("wrote {}", in_path.display());
}
