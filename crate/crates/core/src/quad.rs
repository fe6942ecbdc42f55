//! Fixed-order Gauss-Legendre quadrature helpers.

/// 10-point Gauss-Legendre nodes on [-1, 1] (positive half; nodes are symmetric).
const GL10_NODES: [f64; 5] = [
    0.148_874_338_981_631_21,
    0.433_395_394_129_247_19,
    0.679_409_568_299_024_41,
    0.865_063_366_688_984_51,
    0.973_906_528_517_171_72,
];

const GL10_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_87,
    0.269_266_719_309_996_35,
    0.219_086_362_515_982_04,
    0.149_451_349_150_580_59,
    0.066_671_344_308_688_14,
];

/// 10-point Gauss-Legendre rule on a single interval [a, b].
pub fn gl10(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for i in 0..5 {
        let dx = half * GL10_NODES[i];
        acc += GL10_WEIGHTS[i] * (f(mid - dx) + f(mid + dx));
    }
    half * acc
}

/// Composite 10-point Gauss-Legendre rule with `panels` equal panels.
pub fn composite_gl10(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * width;
        acc += gl10(&mut f, lo, lo + width);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_low_degree_polynomials() {
        // GL-10 integrates degree <= 19 exactly.
        let val = gl10(&mut |x: f64| x.powi(7) - 3.0 * x.powi(2) + 1.0, 0.0, 2.0);
        let exact = 2.0_f64.powi(8) / 8.0 - 2.0_f64.powi(3) + 2.0;
        assert!((val - exact).abs() < 1e-12);
    }

    #[test]
    fn composite_handles_oscillation() {
        let val = composite_gl10(|x: f64| x.cos(), 0.0, 10.0, 20);
        assert!((val - 10.0_f64.sin()).abs() < 1e-12);
    }
}
