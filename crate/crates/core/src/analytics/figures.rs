//! Plot data for distribution and valence/arousal figures. Everything is
//! emitted as CSV tables; rendering is left to the caller's plotting tool.

use std::io::Write;

use super::matrix::ScoreTable;
use super::stats::StatsError;

/// Default bin width for rating distributions.
pub const DEFAULT_BIN_WIDTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistBin {
    pub center: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub bins: Vec<HistBin>,
}

fn bin_count(lo: f64, hi: f64, width: f64) -> usize {
    (((hi - lo) / width) - 1e-9).ceil().max(1.0) as usize
}

fn bin_index(v: f64, lo: f64, width: f64, n: usize) -> usize {
    let raw = ((v - lo) / width).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(n - 1)
    }
}

/// Counts `values` into fixed-width bins over `[lo, hi]`. Values outside the
/// range are counted in the edge bins; NaNs are skipped.
pub fn histogram(
    values: &[f64],
    bin_width: f64,
    range: (f64, f64),
) -> Result<Histogram, StatsError> {
    let (lo, hi) = range;
    if bin_width <= 0.0 || !bin_width.is_finite() {
        return Err(StatsError::Invalid(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    if lo >= hi || !lo.is_finite() || !hi.is_finite() {
        return Err(StatsError::Invalid(format!(
            "empty histogram range [{lo}, {hi}]"
        )));
    }
    let n = bin_count(lo, hi, bin_width);
    let mut counts = vec![0usize; n];
    for &v in values.iter().filter(|v| !v.is_nan()) {
        counts[bin_index(v, lo, bin_width, n)] += 1;
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistBin {
            center: lo + (i as f64 + 0.5) * bin_width,
            count,
        })
        .collect();
    Ok(Histogram {
        lo,
        hi,
        width: bin_width,
        bins,
    })
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Centers of non-empty bins that hold the largest count within
    /// `radius` bins on either side.
    pub fn peak_centers(&self, radius: usize) -> Vec<f64> {
        let n = self.bins.len();
        (0..n)
            .filter(|&i| {
                let c = self.bins[i].count;
                let window = i.saturating_sub(radius)..(i + radius + 1).min(n);
                c > 0 && window.into_iter().all(|j| self.bins[j].count <= c)
            })
            .map(|i| self.bins[i].center)
            .collect()
    }

    /// `bin_center,count`
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_center", "count"])?;
        for b in &self.bins {
            w.write_record([format!("{:.6}", b.center), b.count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `arousal = a * valence^2 + b * valence + c`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }
}

/// Least-squares quadratic fit. The abscissa is centered before solving the
/// normal equations to keep them well conditioned.
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> Result<Quadratic, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(StatsError::TooFew(xs.len()));
    }
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    // Moments of the centered abscissa.
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let d = x - xm;
        let mut p = 1.0;
        for (k, sk) in s.iter_mut().enumerate() {
            *sk += p;
            if k < 3 {
                t[k] += p * y;
            }
            p *= d;
        }
    }
    // Unknowns ordered (c', b', a') for y = a' d^2 + b' d + c'.
    let mut m = [
        [s[0], s[1], s[2], t[0]],
        [s[1], s[2], s[3], t[1]],
        [s[2], s[3], s[4], t[2]],
    ];
    let sol = solve3(&mut m).ok_or(StatsError::Invalid(
        "quadratic fit needs at least 3 distinct x values".into(),
    ))?;
    let (c0, b0, a0) = (sol[0], sol[1], sol[2]);
    Ok(Quadratic {
        a: a0,
        b: b0 - 2.0 * a0 * xm,
        c: a0 * xm * xm - b0 * xm + c0,
    })
}

fn solve3(m: &mut [[f64; 4]; 3]) -> Option<[f64; 3]> {
    let scale = m
        .iter()
        .flat_map(|r| r[..3].iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() <= scale * 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (v, p) in m[row].iter_mut().zip(pivot_row).skip(col) {
                *v -= f * p;
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = ((row + 1)..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][3] - tail) / m[row][row];
    }
    Some(x)
}

/// A rectangular region in valence/arousal space whose members are listed as
/// exceptions to the overall trend. Bounds are exclusive on both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrantRule {
    pub label: String,
    pub valence: (f64, f64),
    pub arousal: (f64, f64),
}

impl QuadrantRule {
    pub fn new(label: &str, valence: (f64, f64), arousal: (f64, f64)) -> Self {
        QuadrantRule {
            label: label.into(),
            valence,
            arousal,
        }
    }

    pub fn matches(&self, valence: f64, arousal: f64) -> bool {
        valence > self.valence.0
            && valence < self.valence.1
            && arousal > self.arousal.0
            && arousal < self.arousal.1
    }
}

/// Neutral-but-arousing, very negative but calm, and very positive but calm.
pub fn default_quadrant_rules() -> Vec<QuadrantRule> {
    let inf = f64::INFINITY;
    vec![
        QuadrantRule::new("neutral_valence_high_arousal", (4.0, 6.0), (8.8, inf)),
        QuadrantRule::new("negative_valence_low_arousal", (-inf, 1.6), (-inf, 4.0)),
        QuadrantRule::new("positive_valence_low_arousal", (8.999, inf), (-inf, 4.0)),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOptions {
    pub bin_width: f64,
    pub valence_range: (f64, f64),
    pub rules: Vec<QuadrantRule>,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            bin_width: 0.5,
            valence_range: (1.0, 9.0),
            rules: default_quadrant_rules(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileBin {
    pub center: f64,
    pub n: usize,
    /// `None` for an empty bin.
    pub mean_arousal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadrantHit {
    pub rule: String,
    pub key: String,
    pub valence: f64,
    pub arousal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValenceArousalProfile {
    pub n: usize,
    pub bins: Vec<ProfileBin>,
    pub fit: Quadratic,
    pub exceptions: Vec<QuadrantHit>,
}

/// Mean arousal per valence bin, a quadratic trend, and the items that fall
/// into each exception quadrant.
pub fn valence_arousal_profile(
    valence: &ScoreTable,
    arousal: &ScoreTable,
    opts: &ProfileOptions,
) -> Result<ValenceArousalProfile, StatsError> {
    let (keys, vs, ars) = valence.intersect(arousal);
    if keys.len() < 10 {
        return Err(StatsError::Invalid(format!(
            "valence/arousal profile needs at least 10 shared items, got {}",
            keys.len()
        )));
    }
    let (lo, hi) = opts.valence_range;
    let hist = histogram(&[], opts.bin_width, (lo, hi))?;
    let nb = hist.bins.len();
    let mut sums = vec![(0usize, 0.0f64); nb];
    for (&v, &a) in vs.iter().zip(&ars) {
        let slot = &mut sums[bin_index(v, lo, opts.bin_width, nb)];
        slot.0 += 1;
        slot.1 += a;
    }
    let bins = hist
        .bins
        .iter()
        .zip(sums)
        .map(|(b, (n, sum))| ProfileBin {
            center: b.center,
            n,
            mean_arousal: (n > 0).then(|| sum / n as f64),
        })
        .collect();
    let fit = fit_quadratic(&vs, &ars)?;
    let mut exceptions = Vec::new();
    for rule in &opts.rules {
        for ((k, &v), &a) in keys.iter().zip(&vs).zip(&ars) {
            if rule.matches(v, a) {
                exceptions.push(QuadrantHit {
                    rule: rule.label.clone(),
                    key: k.clone(),
                    valence: v,
                    arousal: a,
                });
            }
        }
    }
    Ok(ValenceArousalProfile {
        n: keys.len(),
        bins,
        fit,
        exceptions,
    })
}

impl ValenceArousalProfile {
    /// `valence_bin_center,n,mean_arousal,fitted_arousal`
    pub fn write_bins_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["valence_bin_center", "n", "mean_arousal", "fitted_arousal"])?;
        for b in &self.bins {
            w.write_record([
                format!("{:.6}", b.center),
                b.n.to_string(),
                b.mean_arousal
                    .map(|m| format!("{m:.6}"))
                    .unwrap_or_default(),
                format!("{:.6}", self.fit.eval(b.center)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `rule,expression,valence,arousal`
    pub fn write_exceptions_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rule", "expression", "valence", "arousal"])?;
        for e in &self.exceptions {
            w.write_record([
                e.rule.clone(),
                e.key.clone(),
                e.valence.to_string(),
                e.arousal.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts() {
        let h = histogram(&[1.0, 1.0, 2.0], 1.0, (0.5, 2.5)).unwrap();
        assert_eq!(
            h.bins,
            vec![
                HistBin {
                    center: 1.0,
                    count: 2
                },
                HistBin {
                    center: 2.0,
                    count: 1
                }
            ]
        );
        let empty = histogram(&[], 1.0, (0.5, 2.5)).unwrap();
        assert!(empty.bins.iter().all(|b| b.count == 0));
        assert_eq!(empty.bins.len(), 2);
    }

    #[test]
    fn histogram_clamps_to_edges() {
        let h = histogram(&[-3.0, 0.5, 2.5, 99.0], 1.0, (0.5, 2.5)).unwrap();
        assert_eq!(h.bins[0].count, 2);
        assert_eq!(h.bins[1].count, 2);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn tenth_width_bins_align() {
        let h = histogram(&[], DEFAULT_BIN_WIDTH, (0.95, 5.05)).unwrap();
        assert_eq!(h.bins.len(), 41);
        assert!((h.bins[0].center - 1.0).abs() < 1e-12);
        assert!((h.bins[40].center - 5.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_rejects_bad_params() {
        assert!(histogram(&[], 0.0, (0.0, 1.0)).is_err());
        assert!(histogram(&[], 0.1, (1.0, 1.0)).is_err());
    }

    #[test]
    fn exact_quadratic_recovered() {
        let xs: Vec<f64> = (0..40).map(|i| 1.0 + f64::from(i) * 0.2).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x - 5.0) * (x - 5.0)).collect();
        let q = fit_quadratic(&xs, &ys).unwrap();
        assert!((q.a - 1.0).abs() < 1e-9, "{q:?}");
        assert!((q.b + 10.0).abs() < 1e-9, "{q:?}");
        assert!((q.c - 25.0).abs() < 1e-9, "{q:?}");
    }

    #[test]
    fn flat_and_degenerate_fits() {
        let xs: Vec<f64> = (0..20).map(|i| f64::from(i) * 0.4 + 1.0).collect();
        let q = fit_quadratic(&xs, &[3.5; 20]).unwrap();
        assert!(q.a.abs() < 1e-9 && q.b.abs() < 1e-9);
        assert!((q.c - 3.5).abs() < 1e-9);
        assert!(fit_quadratic(&[1.0, 1.0, 2.0, 2.0], &[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn profile_bins_and_exceptions() {
        let keys: Vec<String> = (0..12).map(|i| format!("e{i:02}")).collect();
        let vals = [1.2, 1.5, 2.0, 3.0, 4.5, 5.0, 5.5, 6.5, 7.0, 8.0, 9.0, 9.0];
        let ars = [8.0, 3.0, 7.0, 5.0, 9.0, 3.0, 3.5, 4.0, 5.0, 6.0, 3.0, 7.5];
        let v = ScoreTable::from_pairs("v", keys.iter().cloned().zip(vals));
        let a = ScoreTable::from_pairs("a", keys.iter().cloned().zip(ars));
        let p = valence_arousal_profile(&v, &a, &ProfileOptions::default()).unwrap();
        assert_eq!(p.n, 12);
        assert_eq!(p.bins.len(), 16);
        assert_eq!(p.bins.iter().map(|b| b.n).sum::<usize>(), 12);
        assert_eq!(p.bins[0].mean_arousal, Some(8.0));
        let hits: Vec<(&str, &str)> = p
            .exceptions
            .iter()
            .map(|h| (h.rule.as_str(), h.key.as_str()))
            .collect();
        assert_eq!(
            hits,
            vec![
                ("neutral_valence_high_arousal", "e04"),
                ("negative_valence_low_arousal", "e01"),
                ("positive_valence_low_arousal", "e10"),
            ]
        );
        let short = ScoreTable::from_pairs("s", keys.iter().take(9).cloned().zip(vals));
        assert!(valence_arousal_profile(&short, &a, &ProfileOptions::default()).is_err());
    }
}
