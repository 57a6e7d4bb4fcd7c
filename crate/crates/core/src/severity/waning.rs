//! Vaccine-efficacy waning curves.
//!
//! Efficacy against infection after `v` doses, `w` weeks after the last dose:
//! `VE^v(w) = VE^v(0) * N(w / scale)` with the normalised logistic shape
//! `N(w) = L(w) / L(0)`, `L(w) = 1 / (1 + exp((w - midpoint) / slope))`.
//! The relative infection risk is `h^v(w) = (1 - VE^v(w)) / (1 - VE^v(0))`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, DOSES, STATES};

/// Efficacy over one period of weeks since the second dose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficacyPeriod {
    pub from_week: f64,
    pub to_week: f64,
    pub efficacy: f64,
}

const WEEKS_PER_MONTH: f64 = 30.4375 / 7.0;

const fn month(k: f64, efficacy: f64) -> EfficacyPeriod {
    EfficacyPeriod {
        from_week: (k - 1.0) * WEEKS_PER_MONTH,
        to_week: k * WEEKS_PER_MONTH,
        efficacy,
    }
}

/// Second-dose BNT162b2 efficacy against infection by month since full vaccination,
/// approximate digitisation of Tartof et al. 2021 (Lancet 398:1407), all ages.
pub const SECOND_DOSE_EFFICACY: [EfficacyPeriod; 6] = [
    month(1.0, 0.88),
    month(2.0, 0.86),
    month(3.0, 0.81),
    month(4.0, 0.75),
    month(5.0, 0.67),
    month(6.0, 0.47),
];

/// Efficacy directly after dose 1, 2 and 3 used for the severity factor `h`.
pub const SEVERITY_FULL_EFFICACY: [f64; DOSES] = [0.75, 0.90, 0.95];

/// Logistic `L(w) = 1 / (1 + exp((w - midpoint) / slope))`, weeks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticShape {
    pub midpoint: f64,
    pub slope: f64,
}

impl LogisticShape {
    pub fn eval(&self, w: f64) -> f64 {
        1.0 / (1.0 + ((w - self.midpoint) / self.slope).exp())
    }

    /// `L(w) / L(0)`; equals 1 at `w = 0` exactly.
    pub fn normalised(&self, w: f64) -> f64 {
        if w == 0.0 {
            return 1.0;
        }
        let l0 = (-self.midpoint / self.slope).exp();
        (1.0 + l0) / (1.0 + ((w - self.midpoint) / self.slope).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaningCurve {
    pub shape: LogisticShape,
    /// Multiplier on the time axis; 0.75 halves efficacy in 75 % of the time.
    pub scale: f64,
    /// Efficacy stays at its maximum for all `w`.
    pub no_waning: bool,
    /// `VE^v(0)` for `v = 1, 2, 3`.
    pub full_efficacy: [f64; DOSES],
}

impl WaningCurve {
    /// Curve fitted to [`SECOND_DOSE_EFFICACY`] with [`SEVERITY_FULL_EFFICACY`].
    pub fn regular() -> Self {
        fit_waning(&SECOND_DOSE_EFFICACY, SEVERITY_FULL_EFFICACY, 1.0).expect("embedded table is valid")
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidConfig(format!("waning scale must be positive, got {scale}")));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn without_waning(mut self) -> Self {
        self.no_waning = true;
        self
    }

    pub fn with_full_efficacy(mut self, full_efficacy: [f64; DOSES]) -> Self {
        self.full_efficacy = full_efficacy;
        self
    }

    /// `VE_norm(w) = VE(w) / VE(0)`, shared by all dose counts.
    pub fn ve_norm(&self, w: f64) -> f64 {
        if self.no_waning {
            1.0
        } else {
            self.shape.normalised(w / self.scale)
        }
    }

    /// `VE^v(w)`; zero for `v = 0`.
    pub fn ve(&self, v: usize, w: f64) -> f64 {
        match v {
            0 => 0.0,
            v => self.full_efficacy[v - 1] * self.ve_norm(w),
        }
    }

    /// `h^v(w) = (1 - VE^v(w)) / (1 - VE^v(0))`; one for `v = 0` and for `w = 0`.
    pub fn h(&self, v: usize, w: f64) -> f64 {
        if v == 0 {
            return 1.0;
        }
        let ve0 = self.full_efficacy[v - 1];
        (1.0 - ve0 * self.ve_norm(w)) / (1.0 - ve0)
    }

    /// Table `h[v][w]` for integer waning times `0..weeks`.
    pub fn h_table(&self, weeks: usize) -> [Vec<f64>; STATES] {
        std::array::from_fn(|v| (0..weeks).map(|w| self.h(v, w as f64)).collect())
    }

    /// Weeks until efficacy drops to half its initial value.
    pub fn half_life(&self) -> f64 {
        if self.no_waning {
            return f64::INFINITY;
        }
        // N(x) = 1/2  <=>  exp((x - m)/s) = 1 + 2 exp(-m/s)
        let LogisticShape { midpoint: m, slope: s } = self.shape;
        self.scale * (m + s * (1.0 + 2.0 * (-m / s).exp()).ln())
    }
}

/// Fits the logistic shape to `table` by least squares on period midpoints.
///
/// The amplitude `c` in `VE(w) ≈ c L(w)` is profiled out; only the shape is kept.
pub fn fit_waning(table: &[EfficacyPeriod], full_efficacy: [f64; DOSES], scale: f64) -> Result<WaningCurve> {
    if table.len() < 2 {
        return Err(Error::InvalidConfig("efficacy table needs at least two periods".into()));
    }
    for (i, p) in table.iter().enumerate() {
        if !(p.efficacy > 0.0 && p.efficacy < 1.0) || !(p.to_week > p.from_week && p.from_week >= 0.0) {
            return Err(Error::InvalidConfig(format!("invalid efficacy period {p:?}")));
        }
        if i > 0 && (p.efficacy > table[i - 1].efficacy || p.from_week < table[i - 1].to_week - 1e-9) {
            return Err(Error::InvalidConfig("efficacy table must be ordered and non-increasing".into()));
        }
    }
    if full_efficacy.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidConfig(format!("full efficacies {full_efficacy:?} must lie in (0, 1)")));
    }
    let points: Vec<(f64, f64)> = table
        .iter()
        .map(|p| (0.5 * (p.from_week + p.to_week), p.efficacy))
        .collect();
    let loss = |x: [f64; 2]| {
        let shape = LogisticShape {
            midpoint: x[0],
            slope: x[1].exp(),
        };
        let l: Vec<f64> = points.iter().map(|&(w, _)| shape.eval(w)).collect();
        let c = points.iter().zip(&l).map(|(&(_, y), li)| y * li).sum::<f64>() / l.iter().map(|x| x * x).sum::<f64>();
        points.iter().zip(&l).map(|(&(_, y), li)| (y - c * li).powi(2)).sum::<f64>()
    };
    let span = points.last().expect("non-empty").0;
    let mut best = [span, (span / 4.0).ln()];
    let mut best_loss = loss(best);
    // coarse grid guards the simplex against the flat region of large midpoints
    for i in 0..=40 {
        for j in 0..=30 {
            let x = [span * 3.0 * i as f64 / 40.0, (0.2f64).ln() + j as f64 * 0.15];
            let fx = loss(x);
            if fx < best_loss {
                best = x;
                best_loss = fx;
            }
        }
    }
    let x = nelder_mead(loss, best, [span / 20.0, 0.2], 2000);
    let curve = WaningCurve {
        shape: LogisticShape {
            midpoint: x[0],
            slope: x[1].exp(),
        },
        scale: 1.0,
        no_waning: false,
        full_efficacy,
    };
    curve.with_scale(scale)
}

fn nelder_mead(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: [f64; 2], iters: usize) -> [f64; 2] {
    let mut s = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut fs = s.map(&f);
    for _ in 0..iters {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&i, &j| fs[i].total_cmp(&fs[j]));
        let (b, m, w) = (idx[0], idx[1], idx[2]);
        if (fs[w] - fs[b]).abs() <= 1e-16 * (1.0 + fs[b].abs()) {
            break;
        }
        let c = [0.5 * (s[b][0] + s[m][0]), 0.5 * (s[b][1] + s[m][1])];
        let at = |t: f64| [c[0] + t * (s[w][0] - c[0]), c[1] + t * (s[w][1] - c[1])];
        let r = at(-1.0);
        let fr = f(r);
        if fr < fs[b] {
            let e = at(-2.0);
            let fe = f(e);
            (s[w], fs[w]) = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < fs[m] {
            (s[w], fs[w]) = (r, fr);
        } else {
            let k = if fr < fs[w] { at(-0.5) } else { at(0.5) };
            let fk = f(k);
            if fk < fs[w].min(fr) {
                (s[w], fs[w]) = (k, fk);
            } else {
                for i in [m, w] {
                    s[i] = [0.5 * (s[i][0] + s[b][0]), 0.5 * (s[i][1] + s[b][1])];
                    fs[i] = f(s[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| fs[i].total_cmp(&fs[j])).expect("three vertices");
    s[best]
}
