//! Age-structured discrete renewal model of infections.

mod contact;
mod params;
mod simulate;

use std::path::Path;

use serde::Serialize;

pub use contact::ContactMatrix;
pub use params::{
    generation_kernel, softplus, AgeDynamics, ChangePoint, DynamicsParams, CHANGE_POINTS, CHANGE_POINT_SPACING,
    GENERATION_MEAN, GENERATION_SD, KERNEL_LEN, PROTECTION, REPORTING_DELAY,
};
pub use simulate::{
    correction_factor, infectability, infectability_table, CorrectionFactor, EpidemicState, ModelConfig, Seeding,
    Simulator, PRE_WINDOW_DAYS,
};

use crate::{Error, Result};

#[derive(Serialize)]
struct Row<'a> {
    age_label: &'a str,
    week: usize,
    exposures: f64,
    susceptibles: f64,
    weekly_cases: f64,
    infection_probability: f64,
}

/// Writes a weekly summary of `state`; weeks are one-based.
pub fn write_epidemic_csv(path: &Path, state: &EpidemicState, labels: &[String]) -> Result<()> {
    let to_err = |e: csv::Error| Error::Malformed {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    for (a, label) in labels.iter().enumerate() {
        for t in 0..state.weeks {
            w.serialize(Row {
                age_label: label,
                week: t + 1,
                exposures: state.weekly_exposures[a][t],
                susceptibles: state.susceptibles[a][7 * t],
                weekly_cases: state.weekly_cases[a][t],
                infection_probability: state.infection_probability[a][t],
            })
            .map_err(to_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sim(pops: Vec<f64>, weeks: usize, seed: f64) -> Simulator {
        let n = pops.len();
        Simulator::new(
            ModelConfig::default(),
            pops,
            weeks,
            Seeding {
                daily: vec![vec![seed; PRE_WINDOW_DAYS]; n],
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_reproduction_dies_out() {
        let s = sim(vec![1e6, 2e6], 4, 100.0);
        let p = DynamicsParams::constant(&[0.0, 0.0], 4, 21.0);
        let out = s.run(&p, &vec![vec![1.0; 4]; 2]).unwrap();
        for a in 0..2 {
            assert!(out.exposures[a][PRE_WINDOW_DAYS..].iter().all(|&e| e == 0.0));
            assert_eq!(out.weekly_cases[a][0], 800.0);
            assert_eq!(out.weekly_cases[a][2], 0.0);
        }
    }

    #[test]
    fn unit_reproduction_without_depletion_is_stationary() {
        let mut s = sim(vec![1e6], 6, 50.0);
        s.config.depletion = false;
        let p = DynamicsParams::constant(&[1.0], 6, 21.0);
        let out = s.run(&p, &[vec![1.0; 6]]).unwrap();
        for &e in &out.exposures[0] {
            assert!((e - 50.0).abs() < 1e-9);
        }
        assert!(out.weekly_cases[0].iter().all(|&c| (c - 400.0).abs() < 1e-9));
    }

    #[test]
    fn hand_recursion_with_point_kernel() {
        // g(0) = 1: E(d) = Σ_b sqrt(R_a) C_ab sqrt(R_b) E_b(d-1) S_a(d)/D_a + h_a(d)
        let mut s = sim(vec![100.0, 300.0], 1, 0.0);
        s.config.kernel = [0.0; KERNEL_LEN];
        s.config.kernel[0] = 1.0;
        s.config.gamma = 0.5;
        s.contact = ContactMatrix::new(0.5, &[100.0, 300.0]).unwrap();
        s.seeding.daily = vec![vec![0.0; PRE_WINDOW_DAYS]; 2];
        s.seeding.daily[0][PRE_WINDOW_DAYS - 1] = 2.0;
        s.seeding.daily[1][PRE_WINDOW_DAYS - 1] = 1.0;
        let mut p = DynamicsParams::constant(&[1.44, 0.81], 1, 21.0);
        p.ages[1].influx[0] = 7.0;
        let inf = vec![vec![1.0], vec![0.5]];
        let out = s.run(&p, &inf).unwrap();

        let r = [1.44f64.sqrt(), (0.81f64 * 0.5).sqrt()];
        let c = [[0.5 + 0.5 * 0.25, 0.5 * 0.25], [0.5 * 0.75, 0.5 + 0.5 * 0.75]];
        let d = [100.0, 300.0];
        let h = [0.0, 1.0];
        let mut e = [2.0, 1.0];
        let mut sus = d;
        for day in 0..3 {
            let mut next = [0.0; 2];
            for a in 0..2 {
                let mix: f64 = (0..2).map(|b| c[a][b] * r[b] * e[b]).sum();
                next[a] = r[a] * mix * sus[a] / d[a] + h[a];
            }
            for a in 0..2 {
                assert!((out.exposure(a, day) - next[a]).abs() < 1e-12, "day {day} group {a}");
                sus[a] -= next[a] - h[a];
                assert!((out.susceptibles[a][day as usize + 1] - sus[a]).abs() < 1e-12);
            }
            e = next;
        }
    }

    #[test]
    fn runaway_growth_is_a_numerical_error() {
        let s = sim(vec![1000.0], 8, 100.0);
        let p = DynamicsParams::constant(&[1e6], 8, 21.0);
        assert!(matches!(s.run(&p, &[vec![1.0; 8]]), Err(Error::Numerical(_))));
    }

    #[test]
    fn factual_correction_is_one() {
        let s = sim(vec![1e5, 2e5], 5, 10.0);
        let p = DynamicsParams::constant(&[1.2, 0.9], 5, 21.0);
        let run = s.run(&p, &vec![vec![0.8; 5]; 2]).unwrap();
        let cf = correction_factor(&run, &run).unwrap();
        assert!(cf.f1.iter().flatten().all(|&x| x == 1.0));
        let mut half = run.clone();
        half.infection_probability.iter_mut().flatten().for_each(|p| *p *= 0.5);
        let cf = correction_factor(&run, &half).unwrap();
        assert!(cf.f1.iter().flatten().all(|&x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn infectability_examples() {
        let p = PROTECTION;
        assert_eq!(infectability([1.0, 0.0, 0.0, 0.0], [1.0; 3], p), 1.0);
        assert!((infectability([0.0, 0.0, 0.0, 1.0], [1.0; 3], p) - 0.05).abs() < 1e-15);
        assert!((infectability([0.5, 0.0, 0.5, 0.0], [1.0, 0.5, 1.0], p) - 0.775).abs() < 1e-15);
    }

    fn random_params(n: usize, weeks: usize, r0: &[f64], effects: &[f64], influx: &[f64]) -> DynamicsParams {
        let mut p = DynamicsParams::constant(&r0[..n], weeks, 10.0);
        for (a, age) in p.ages.iter_mut().enumerate() {
            for (k, cp) in age.change_points.iter_mut().enumerate() {
                cp.effect = effects[(a * 10 + k) % effects.len()];
            }
            for (t, h) in age.influx.iter_mut().enumerate() {
                *h = influx[(a + t) % influx.len()];
            }
        }
        p
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exposures_and_susceptibles_balance_influx(
            n in 1usize..4,
            r0 in prop::collection::vec(0.3f64..2.5, 3),
            effects in prop::collection::vec(-0.5f64..0.5, 10),
            influx in prop::collection::vec(0.0f64..50.0, 5),
            gamma in 0.0f64..1.0,
        ) {
            let weeks = 12;
            let pops: Vec<f64> = (0..n).map(|a| 1e5 * (a + 1) as f64).collect();
            let mut s = sim(pops.clone(), weeks, 20.0);
            s.config.gamma = gamma;
            s.contact = ContactMatrix::new(gamma, &pops).unwrap();
            let p = random_params(n, weeks, &r0, &effects, &influx);
            let out = s.run(&p, &vec![vec![0.9; weeks]; n]).unwrap();
            for a in 0..n {
                let exposed: f64 = out.exposures[a][PRE_WINDOW_DAYS..].iter().sum();
                let imported: f64 = out.influx[a].iter().sum();
                let s_end = *out.susceptibles[a].last().unwrap();
                let lhs = exposed + s_end;
                let rhs = pops[a] + imported;
                prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs);
                prop_assert!(out.susceptibles[a].windows(2).all(|w| w[1] <= w[0]));
            }
        }

        #[test]
        fn larger_reproduction_never_lowers_cumulative_exposures(
            r0 in prop::collection::vec(0.3f64..2.0, 3),
            bump in 0.0f64..0.5,
        ) {
            let weeks = 15;
            let pops = vec![2e4, 5e4, 3e4];
            let s = sim(pops, weeks, 30.0);
            let low = DynamicsParams::constant(&r0, weeks, 10.0);
            let high_r: Vec<f64> = r0.iter().map(|r| r * (1.0 + bump)).collect();
            let high = DynamicsParams::constant(&high_r, weeks, 10.0);
            let inf = vec![vec![1.0; weeks]; 3];
            let (lo, hi) = (s.run(&low, &inf).unwrap(), s.run(&high, &inf).unwrap());
            for a in 0..3 {
                let mut cl = 0.0;
                let mut ch = 0.0;
                for d in PRE_WINDOW_DAYS..lo.exposures[a].len() {
                    cl += lo.exposures[a][d];
                    ch += hi.exposures[a][d];
                    prop_assert!(ch >= cl * (1.0 - 1e-12));
                }
            }
        }

        #[test]
        fn swapping_identical_groups_permutes_output(r in 0.5f64..1.8, other in 0.5f64..1.8) {
            let weeks = 6;
            let s = sim(vec![1e5, 1e5, 4e4], weeks, 15.0);
            let p = DynamicsParams::constant(&[r, r, other], weeks, 10.0);
            let mut inf = vec![vec![0.9; weeks]; 3];
            inf[2] = vec![0.7; weeks];
            let out = s.run(&p, &inf).unwrap();
            prop_assert_eq!(&out.exposures[0], &out.exposures[1]);
        }
    }
}
