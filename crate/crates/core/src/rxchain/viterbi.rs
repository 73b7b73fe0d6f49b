//! Soft-decision Viterbi decoding of the K = 7 codes.
//!
//! Soft inputs follow the demodulator convention (positive means bit 1) and
//! are quantized to 4-bit integers in `-7..=7` before decoding. Branch
//! metrics are correlations, so the decoder maximizes the path metric.
//! Punctured positions are simply absent from the input and contribute nothing.
//!
//! The tail-biting header code is decoded exactly: the best path that ends
//! where it started, searched with one Viterbi pass per starting state but
//! pruned by a free-start pass.

use crate::error::{Error, Result};
use crate::txchain::conv::{CodeMode, MEMORY, N_STATES, OUTPUT_TABLE};

pub const QUANT_MAX: i32 = 7;
/// Quantizer gain: the mean soft magnitude lands on this level.
const QUANT_SCALE: f64 = 4.0;

/// Scales soft values so their mean magnitude maps to level 4 and clips to ±7.
pub fn quantize(soft: &[f64]) -> Vec<i32> {
    let mean = soft.iter().map(|s| s.abs()).sum::<f64>() / soft.len().max(1) as f64;
    if mean == 0.0 || !mean.is_finite() {
        return vec![0; soft.len()];
    }
    let g = QUANT_SCALE / mean;
    soft.iter()
        .map(|s| ((s * g).round() as i32).clamp(-QUANT_MAX, QUANT_MAX))
        .collect()
}

/// Correlation metric of a coded bit sequence against quantized soft values.
pub fn path_metric(coded: &[u8], metrics: &[i32]) -> i64 {
    coded
        .iter()
        .zip(metrics)
        .map(|(&c, &m)| if c & 1 == 1 { i64::from(m) } else { -i64::from(m) })
        .sum()
}

struct Trellis {
    /// Per step, the (offset, kept generator mask) into the metric stream.
    steps: Vec<(usize, u8)>,
}

impl Trellis {
    fn new(mode: CodeMode, n_steps: usize, n_metrics: usize) -> Result<Self> {
        let mut steps = Vec::with_capacity(n_steps);
        let mut offset = 0;
        for step in 0..n_steps {
            let mut mask = 0u8;
            for &g in mode.kept_outputs(step) {
                mask |= 1 << g;
            }
            steps.push((offset, mask));
            offset += mode.kept_outputs(step).len();
        }
        if offset != n_metrics {
            return Err(Error::InvalidLength {
                expected: format!("{offset} soft values"),
                actual: n_metrics,
            });
        }
        Ok(Trellis { steps })
    }

    /// Branch metric for each packed 3-bit output given the step's soft values.
    fn branch_table(&self, step: usize, metrics: &[i32]) -> [i32; 8] {
        let (offset, mask) = self.steps[step];
        let mut soft = [0i32; 3];
        let mut k = offset;
        for (g, s) in soft.iter_mut().enumerate() {
            if mask & (1 << g) != 0 {
                *s = metrics[k];
                k += 1;
            }
        }
        let mut table = [0i32; 8];
        for (packed, t) in table.iter_mut().enumerate() {
            *t = (0..3)
                .map(|g| if packed >> g & 1 == 1 { soft[g] } else { -soft[g] })
                .sum();
        }
        table
    }

    /// Runs the add-compare-select recursion from the given initial metrics.
    /// Returns final metrics and per-step decision words.
    fn run(&self, metrics: &[i32], init: [i64; N_STATES]) -> ([i64; N_STATES], Vec<u64>) {
        let mut pm = init;
        let mut decisions = Vec::with_capacity(self.steps.len());
        for step in 0..self.steps.len() {
            let bt = self.branch_table(step, metrics);
            let mut next = [i64::MIN; N_STATES];
            let mut word = 0u64;
            for (ns, slot) in next.iter_mut().enumerate() {
                let u = ns >> (MEMORY - 1);
                let p0 = (ns << 1) & (N_STATES - 1);
                let p1 = p0 | 1;
                let m0 = add(pm[p0], bt[OUTPUT_TABLE[p0][u] as usize]);
                let m1 = add(pm[p1], bt[OUTPUT_TABLE[p1][u] as usize]);
                if m1 > m0 {
                    *slot = m1;
                    word |= 1 << ns;
                } else {
                    *slot = m0;
                }
            }
            pm = next;
            decisions.push(word);
        }
        (pm, decisions)
    }
}

fn add(pm: i64, bm: i32) -> i64 {
    if pm == i64::MIN {
        i64::MIN
    } else {
        pm + i64::from(bm)
    }
}

/// Input bits along the survivor ending in `end_state`, and the state it started from.
fn traceback(decisions: &[u64], end_state: usize) -> (Vec<u8>, usize) {
    let mut state = end_state;
    let mut inputs = vec![0u8; decisions.len()];
    for step in (0..decisions.len()).rev() {
        inputs[step] = (state >> (MEMORY - 1)) as u8;
        let b = (decisions[step] >> state) & 1;
        state = ((state << 1) & (N_STATES - 1)) | b as usize;
    }
    (inputs, state)
}

/// Decoded information bits and the winning path metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub bits: Vec<u8>,
    pub metric: i64,
}

/// Maximum-likelihood decoding of `n_info` information bits from quantized metrics.
pub fn viterbi_decode(metrics: &[i32], mode: CodeMode, n_info: usize) -> Result<Decoded> {
    if n_info == 0 {
        return Err(Error::InvalidLength {
            expected: "at least one information bit".into(),
            actual: 0,
        });
    }
    let trellis = Trellis::new(mode, mode.steps(n_info), metrics.len())?;
    if !mode.is_tail_biting() {
        let mut init = [i64::MIN; N_STATES];
        init[0] = 0;
        let (pm, decisions) = trellis.run(metrics, init);
        let (mut bits, _) = traceback(&decisions, 0);
        bits.truncate(n_info);
        return Ok(Decoded { bits, metric: pm[0] });
    }
    // A free-start pass bounds every tail-biting path ending in state s by
    // its survivor metric there. If the overall survivor is itself a cycle it
    // is the answer; otherwise start states are tried best bound first until
    // no bound can beat the best cycle found.
    let (free, decisions) = trellis.run(metrics, [0; N_STATES]);
    let top = (0..N_STATES).max_by_key(|&s| (free[s], std::cmp::Reverse(s))).unwrap_or(0);
    let (bits, start) = traceback(&decisions, top);
    if start == top {
        return Ok(Decoded { bits, metric: free[top] });
    }
    let mut order: Vec<usize> = (0..N_STATES).collect();
    order.sort_by_key(|&s| (std::cmp::Reverse(free[s]), s));
    let mut best: Option<Decoded> = None;
    for start in order {
        if best.as_ref().is_some_and(|b| free[start] <= b.metric) {
            break;
        }
        let mut init = [i64::MIN; N_STATES];
        init[start] = 0;
        let (pm, decisions) = trellis.run(metrics, init);
        if pm[start] == i64::MIN {
            continue;
        }
        if best.as_ref().is_none_or(|b| pm[start] > b.metric) {
            best = Some(Decoded {
                bits: traceback(&decisions, start).0,
                metric: pm[start],
            });
        }
    }
    // For n_info < MEMORY not every state is a consistent cycle, but the
    // zero state always is, so a path exists.
    best.ok_or_else(|| Error::InvalidLength {
        expected: "a decodable tail-biting block".into(),
        actual: n_info,
    })
}

/// Quantizes soft values and decodes them.
pub fn decode_soft(soft: &[f64], mode: CodeMode, n_info: usize) -> Result<Vec<u8>> {
    Ok(viterbi_decode(&quantize(soft), mode, n_info)?.bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txchain::conv::conv_encode;

    fn to_metrics(coded: &[u8]) -> Vec<i32> {
        coded.iter().map(|&c| if c == 1 { 7 } else { -7 }).collect()
    }

    #[test]
    fn noiseless_roundtrip_all_modes() {
        let info: Vec<u8> = (0..40).map(|i| ((i * 13 + 5) % 7 % 2) as u8).collect();
        for mode in [
            CodeMode::HalfTailBiting,
            CodeMode::ThirdZeroTail,
            CodeMode::TwoThirdsZeroTail,
        ] {
            let coded = conv_encode(&info, mode).unwrap();
            let d = viterbi_decode(&to_metrics(&coded), mode, info.len()).unwrap();
            assert_eq!(d.bits, info, "{mode:?}");
            assert_eq!(d.metric, 7 * coded.len() as i64);
        }
    }

    #[test]
    fn corrects_scattered_errors() {
        let info: Vec<u8> = (0..40).map(|i| ((i * 29 + 3) % 5 % 2) as u8).collect();
        let coded = conv_encode(&info, CodeMode::HalfTailBiting).unwrap();
        let mut m = to_metrics(&coded);
        for k in [3, 21, 44, 70] {
            m[k] = -m[k];
        }
        let d = viterbi_decode(&m, CodeMode::HalfTailBiting, 40).unwrap();
        assert_eq!(d.bits, info);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(viterbi_decode(&[0; 79], CodeMode::HalfTailBiting, 40).is_err());
        assert!(viterbi_decode(&[0; 80], CodeMode::ThirdZeroTail, 40).is_err());
    }

    #[test]
    fn quantizer_levels() {
        let q = quantize(&[1.0, -1.0, 0.5, 100.0, 0.0]);
        assert!(q.iter().all(|v| v.abs() <= QUANT_MAX));
        assert_eq!(q[4], 0);
        assert_eq!(quantize(&[0.0; 4]), vec![0; 4]);
    }
}
