//! Measurement simulation: computational-basis shots drawn from exact tables
//! or block-Gibbs chains, plus the two noise channels (bounded perturbation of
//! the magnitudes and per-qubit coherent bit flips).

use std::io::{BufRead, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Error, Result};
use crate::model::{sigmoid, RbmModel};
use crate::table::DistributionTable;

/// Name of the generator behind every seeded stream in this crate.
pub const RNG_ALGORITHM: &str = "ChaCha20";

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer over a sequence of words; used to derive independent
/// child seeds from `(base, coordinates...)`.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut z: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        z = z.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Matrix of ±1 measurement outcomes, one row per shot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    n: usize,
    shots: Vec<i8>,
    seed: u64,
    rng: String,
}

impl SampleSet {
    /// Wraps row-major shots; every entry must be ±1.
    pub fn new(n: usize, shots: Vec<i8>, seed: u64) -> Result<Self> {
        if n == 0 || shots.len() % n != 0 {
            return Err(Error::Structural(format!("{} entries do not form rows of length {n}", shots.len())));
        }
        if let Some(pos) = shots.iter().position(|s| *s != 1 && *s != -1) {
            return domain(format!("entry {pos} = {} is not ±1", shots[pos]));
        }
        Ok(Self { n, shots, seed, rng: RNG_ALGORITHM.to_string() })
    }

    pub fn from_rows(rows: &[Vec<i8>], seed: u64) -> Result<Self> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Structural("rows have different lengths".into()));
        }
        Self::new(n, rows.concat(), seed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        self.shots.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng_algorithm(&self) -> &str {
        &self.rng
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.shots[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.shots.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.shots
    }

    /// First `count` shots (all of them if fewer are available).
    pub fn truncated(&self, count: usize) -> SampleSet {
        let end = (count * self.n).min(self.shots.len());
        SampleSet { n: self.n, shots: self.shots[..end].to_vec(), seed: self.seed, rng: self.rng.clone() }
    }

    /// Concatenation of several sets over the same variables; keeps the first seed.
    pub fn concat(parts: &[SampleSet]) -> Result<SampleSet> {
        let first = parts.first().ok_or_else(|| Error::Domain("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.n != first.n) {
            return Err(Error::Structural("sample sets have different widths".into()));
        }
        let shots = parts.iter().flat_map(|p| p.shots.iter().copied()).collect();
        Ok(SampleSet { n: first.n, shots, seed: first.seed, rng: first.rng.clone() })
    }

    /// Empirical distribution as a table (needs `n` within the enumeration limit).
    pub fn empirical_table(&self) -> Result<DistributionTable> {
        if self.is_empty() {
            return domain("empty sample set");
        }
        crate::table::check_enumerable(self.n, crate::table::DEFAULT_ENUMERATION_LIMIT)?;
        let mut counts = vec![0.0; 1 << self.n];
        for row in self.rows() {
            counts[crate::table::index_of(row)?] += 1.0;
        }
        DistributionTable::from_weights(self.n, counts)
    }
}

/// Noise applied between the ideal state and the measurement record.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    None,
    /// Every magnitude `p(x)` moved by an independent uniform amount in
    /// `[-eps_inf, eps_inf]`, clipped at zero and renormalized.
    LinfPerturb {
        eps_inf: f64,
        #[serde(with = "crate::pnorm")]
        p_norm: f64,
    },
    /// Each measured bit flipped independently with probability `rho`.
    Bitflip {
        rho: f64,
        #[serde(with = "crate::pnorm")]
        p_norm: f64,
    },
}

/// I.i.d. shots from `table` by inverse-CDF lookup; deterministic in `seed`.
pub fn sample_exact(table: &DistributionTable, count: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return precondition("count must be at least 1");
    }
    let mut cdf = Vec::with_capacity(table.probs().len());
    let mut acc = 0.0;
    for p in table.probs() {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let n = table.n();
    let mut rng = rng_from_seed(seed);
    let mut shots = Vec::with_capacity(count * n);
    for _ in 0..count {
        let u = rng.gen::<f64>() * total;
        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        shots.extend((0..n).map(|b| crate::table::spin(k, b)));
    }
    SampleSet::new(n, shots, seed)
}

#[inline]
fn draw_spin<R: Rng>(rng: &mut R, activation: f64) -> i8 {
    if rng.gen::<f64>() < sigmoid(2.0 * activation) {
        1
    } else {
        -1
    }
}

/// Block-Gibbs chain on the RBM: all hidden units given the visible layer,
/// then all visible units given the hidden layer. After `burn_in` sweeps the
/// visible state is recorded every `thinning` sweeps.
pub fn sample_gibbs(model: &RbmModel, count: usize, burn_in: usize, thinning: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return precondition("count must be at least 1");
    }
    if thinning == 0 {
        return precondition("thinning must be at least 1");
    }
    let n = model.n();
    let mut rng = rng_from_seed(seed);
    let mut x: Vec<i8> = (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
    let mut y = vec![1i8; model.m()];
    let sweep = |x: &mut Vec<i8>, y: &mut Vec<i8>, rng: &mut ChaCha20Rng| {
        for (yk, a) in y.iter_mut().zip(model.hidden_activations(x)) {
            *yk = draw_spin(rng, a);
        }
        for (xi, a) in x.iter_mut().zip(model.visible_activations(y)) {
            *xi = draw_spin(rng, a);
        }
    };
    for _ in 0..burn_in {
        sweep(&mut x, &mut y, &mut rng);
    }
    let mut shots = Vec::with_capacity(count * n);
    for _ in 0..count {
        for _ in 0..thinning {
            sweep(&mut x, &mut y, &mut rng);
        }
        shots.extend_from_slice(&x);
    }
    SampleSet::new(n, shots, seed)
}

/// Runs `chains` independent Gibbs chains in parallel (child seeds derived
/// from `seed`) and concatenates them in chain order.
pub fn sample_gibbs_chains(
    model: &RbmModel,
    count: usize,
    chains: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> Result<SampleSet> {
    if chains == 0 {
        return precondition("at least one chain is required");
    }
    let per = count.div_ceil(chains);
    let parts: Result<Vec<SampleSet>> = (0..chains)
        .into_par_iter()
        .map(|c| sample_gibbs(model, per, burn_in, thinning, derive_seed(&[seed, c as u64])))
        .collect();
    let mut merged = SampleSet::concat(&parts?)?.truncated(count);
    merged.seed = seed;
    Ok(merged)
}

/// Realized distances between a table and its perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AchievedDistance {
    pub linf: f64,
    pub lp: f64,
    #[serde(with = "crate::pnorm")]
    pub p_norm: f64,
}

/// Bounded random perturbation of the magnitudes. The realized distances are
/// returned since clipping and renormalization move the result away from the
/// requested bound.
pub fn perturb_linf(
    table: &DistributionTable,
    eps_inf: f64,
    p_norm: f64,
    seed: u64,
) -> Result<(DistributionTable, AchievedDistance)> {
    if !(eps_inf >= 0.0 && eps_inf.is_finite()) {
        return precondition("eps_inf must be finite and non-negative");
    }
    if !(p_norm >= 1.0) {
        return precondition("p_norm must be at least 1");
    }
    let mut rng = rng_from_seed(seed);
    let raw: Vec<f64> = table
        .probs()
        .iter()
        .map(|p| {
            let delta = if eps_inf > 0.0 { rng.gen_range(-eps_inf..=eps_inf) } else { 0.0 };
            (p + delta).max(0.0)
        })
        .collect();
    if raw.iter().all(|w| *w == 0.0) {
        return domain("perturbation zeroed every probability");
    }
    let out = if eps_inf == 0.0 { table.clone() } else { DistributionTable::from_weights(table.n(), raw)? };
    let achieved = AchievedDistance {
        linf: crate::metrics::lp_distance(table, &out, f64::INFINITY)?,
        lp: crate::metrics::lp_distance(table, &out, p_norm)?,
        p_norm,
    };
    Ok((out, achieved))
}

/// Negates each entry independently with probability `rho`.
pub fn apply_bitflip(samples: &SampleSet, rho: f64, seed: u64) -> Result<SampleSet> {
    if !(0.0..=1.0).contains(&rho) {
        return precondition("rho must lie in [0, 1]");
    }
    let mut rng = rng_from_seed(seed);
    let shots = samples.shots.iter().map(|&s| if rng.gen_bool(rho) { -s } else { s }).collect();
    Ok(SampleSet { n: samples.n, shots, seed, rng: samples.rng.clone() })
}

/// Outcome distribution after the product bit-flip channel, applied one
/// variable at a time.
pub fn bitflip_distribution(table: &DistributionTable, rho: f64) -> Result<DistributionTable> {
    if !(0.0..=1.0).contains(&rho) {
        return precondition("rho must lie in [0, 1]");
    }
    let mut p = table.probs().to_vec();
    for b in 0..table.n() {
        let bit = 1usize << b;
        for k in 0..p.len() {
            if k & bit == 0 {
                let (a, c) = (p[k], p[k | bit]);
                p[k] = (1.0 - rho) * a + rho * c;
                p[k | bit] = rho * a + (1.0 - rho) * c;
            }
        }
    }
    DistributionTable::from_weights(table.n(), p)
}

const BINARY_MAGIC: &[u8; 4] = b"NNQS";

/// Text format: a `n=<n> count=<count> seed=<seed>` header, then one row per
/// shot of space-separated `+1` / `-1`.
pub fn write_samples_text<W: Write>(samples: &SampleSet, mut w: W) -> Result<()> {
    writeln!(w, "n={} count={} seed={}", samples.n, samples.count(), samples.seed)?;
    let mut line = String::with_capacity(samples.n * 3);
    for row in samples.rows() {
        line.clear();
        for (i, s) in row.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(if *s > 0 { "+1" } else { "-1" });
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_samples_text<R: BufRead>(r: R) -> Result<SampleSet> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Domain("empty sample file".into()))??;
    let mut n = None;
    let mut count = None;
    let mut seed = None;
    for field in header.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(|| Error::Domain(format!("bad header field {field}")))?;
        let parsed: u64 = value.parse().map_err(|_| Error::Domain(format!("bad header value {field}")))?;
        match key {
            "n" => n = Some(parsed as usize),
            "count" => count = Some(parsed as usize),
            "seed" => seed = Some(parsed),
            _ => return domain(format!("unknown header field {key}")),
        }
    }
    let (n, count, seed) = match (n, count, seed) {
        (Some(n), Some(c), Some(s)) => (n, c, s),
        _ => return domain("header must contain n, count and seed"),
    };
    let mut shots = Vec::with_capacity(n * count);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = shots.len();
        for tok in line.split_whitespace() {
            shots.push(match tok {
                "+1" | "1" => 1,
                "-1" => -1,
                _ => return domain(format!("bad spin token {tok}")),
            });
        }
        if shots.len() - before != n {
            return domain(format!("row with {} entries, expected {n}", shots.len() - before));
        }
    }
    if shots.len() != n * count {
        return domain(format!("header announces {count} rows, found {}", shots.len() / n.max(1)));
    }
    SampleSet::new(n, shots, seed)
}

/// Binary format: 16-byte header (`NNQS`, `n` as u32 LE, `count` as u64 LE)
/// followed by one byte per spin, row-major, `0x00` for -1 and `0x01` for +1.
pub fn write_samples_binary<W: Write>(samples: &SampleSet, mut w: W) -> Result<()> {
    let n = u32::try_from(samples.n).map_err(|_| Error::Domain("n does not fit in u32".into()))?;
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&(samples.count() as u64).to_le_bytes())?;
    let bytes: Vec<u8> = samples.shots.iter().map(|&s| u8::from(s > 0)).collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads the binary format; the header carries no seed, so it is reported as 0.
pub fn read_samples_binary<R: Read>(mut r: R) -> Result<SampleSet> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != BINARY_MAGIC {
        return domain("missing NNQS magic");
    }
    let n = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
    let count = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes")) as usize;
    let mut body = Vec::with_capacity(n * count);
    r.read_to_end(&mut body)?;
    if body.len() != n * count {
        return domain(format!("expected {} spin bytes, found {}", n * count, body.len()));
    }
    let shots = body
        .into_iter()
        .map(|b| match b {
            0 => Ok(-1),
            1 => Ok(1),
            other => domain(format!("bad spin byte {other:#04x}")),
        })
        .collect::<Result<Vec<i8>>>()?;
    SampleSet::new(n, shots, 0)
}

/// Reads either format, detecting the binary magic.
pub fn read_samples_file(path: &std::path::Path) -> Result<SampleSet> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_samples_binary(bytes.as_slice())
    } else {
        read_samples_text(bytes.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_sampling() {
        let t = DistributionTable::point_mass(&[1, 1]).unwrap();
        let s = sample_exact(&t, 50, 1).unwrap();
        assert!(s.as_slice().iter().all(|&v| v == 1));
    }

    #[test]
    fn zero_probability_entries_are_never_drawn() {
        let t = DistributionTable::new(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let s = sample_exact(&t, 2000, 9).unwrap();
        assert!(s.rows().all(|r| r[0] == r[1]));
    }

    #[test]
    fn sampling_is_deterministic() {
        let t = DistributionTable::uniform(3).unwrap();
        assert_eq!(sample_exact(&t, 100, 5).unwrap(), sample_exact(&t, 100, 5).unwrap());
        assert_ne!(sample_exact(&t, 100, 5).unwrap(), sample_exact(&t, 100, 6).unwrap());
        assert_eq!(sample_exact(&t, 1, 5).unwrap().rng_algorithm(), RNG_ALGORITHM);
        assert!(sample_exact(&t, 0, 5).is_err());
    }

    #[test]
    fn bitflip_extremes() {
        let s = SampleSet::from_rows(&[vec![1, -1], vec![-1, -1]], 0).unwrap();
        assert_eq!(apply_bitflip(&s, 0.0, 1).unwrap().as_slice(), s.as_slice());
        let all = apply_bitflip(&s, 1.0, 1).unwrap();
        assert!(all.as_slice().iter().zip(s.as_slice()).all(|(a, b)| *a == -*b));
        assert!(apply_bitflip(&s, 1.5, 1).is_err());
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let t = DistributionTable::new(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (out, d) = perturb_linf(&t, 0.0, 2.0, 4).unwrap();
        assert_eq!(out, t);
        assert_eq!((d.linf, d.lp), (0.0, 0.0));
    }

    #[test]
    fn text_and_binary_formats_round_trip() {
        let s = SampleSet::from_rows(&[vec![1, -1, 1], vec![-1, -1, 1]], 77).unwrap();
        let mut buf = Vec::new();
        write_samples_text(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "n=3 count=2 seed=77\n+1 -1 +1\n-1 -1 +1\n");
        assert_eq!(read_samples_text(buf.as_slice()).unwrap(), s);

        let mut bin = Vec::new();
        write_samples_binary(&s, &mut bin).unwrap();
        assert_eq!(bin.len(), 16 + 6);
        assert_eq!(&bin[16..], &[1, 0, 1, 0, 0, 1]);
        let back = read_samples_binary(bin.as_slice()).unwrap();
        assert_eq!(back.as_slice(), s.as_slice());
    }

    #[test]
    fn malformed_text_is_rejected() {
        assert!(read_samples_text("n=2 count=1 seed=0\n+1\n".as_bytes()).is_err());
        assert!(read_samples_text("n=2 count=2 seed=0\n+1 -1\n".as_bytes()).is_err());
        assert!(read_samples_text("n=2 count=1 seed=0\n+1 0\n".as_bytes()).is_err());
    }

    #[test]
    fn derived_seeds_differ_by_coordinate() {
        assert_ne!(derive_seed(&[1, 2, 3]), derive_seed(&[1, 3, 2]));
        assert_eq!(derive_seed(&[1, 2, 3]), derive_seed(&[1, 2, 3]));
    }
}
