use sleeplite::energy::{OpProfile, Precision};
use sleeplite::qnn::{Layer, Shape};

/// Multiply-accumulates of one layer, counted by walking every output.
pub fn mac_oracle(l: &Layer, input: Shape) -> u64 {
    let mut n = 0u64;
    match l {
        Layer::Conv1d {
            in_ch,
            out_ch,
            kernel,
            stride,
            ..
        } => {
            let mut t = 0;
            while t + kernel <= input.len {
                for _o in 0..*out_ch {
                    for _k in 0..*kernel {
                        for _c in 0..*in_ch {
                            n += 1;
                        }
                    }
                }
                t += stride;
            }
        }
        Layer::DepthwiseConv1d {
            ch, kernel, stride, ..
        } => {
            let mut t = 0;
            while t + kernel <= input.len {
                n += (ch * kernel) as u64;
                t += stride;
            }
        }
        Layer::Dense {
            in_dim, out_dim, ..
        } => {
            for _ in 0..*out_dim {
                n += *in_dim as u64;
            }
        }
        _ => {}
    }
    n
}
/// Per-byte cost recomputed from the anchors: flat below the first,
/// geometric between neighbours, off-chip above the last.
pub fn per_byte_oracle(b: usize) -> f64 {
    let anchors = [(8192.0, 1.25), (32768.0, 2.5), (1_048_576.0, 12.5)];
    let b = b as f64;
    if b <= anchors[0].0 {
        return anchors[0].1;
    }
    for w in anchors.windows(2) {
        let ((s0, e0), (s1, e1)) = (w[0], w[1]);
        if b <= s1 {
            let f: f64 = (b / s0).log2() / (s1 / s0).log2();
            return e0 * (e1 / e0).powf(f);
        }
    }
    160.0
}

pub fn energy_oracle(p: &OpProfile) -> f64 {
    let (m, a) = match p.precision {
        Precision::Float32 => (3.7, 0.9),
        Precision::Int8 => (0.2, 0.03),
    };
    let mem = |b: usize| b as f64 * per_byte_oracle(b);
    p.layers
        .iter()
        .map(|l| {
            l.mults as f64 * m
                + l.adds as f64 * a
                + l.weight_bytes.iter().map(|&b| mem(b)).sum::<f64>()
                + mem(l.act_read_bytes)
                + mem(l.act_write_bytes)
        })
        .sum::<f64>()
        * 1e-6
}
