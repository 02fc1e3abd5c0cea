use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::edt::{normalize, ImageOracle};
use crate::scenes::Renderer;
use crate::splits::SplitScheme;

fn small() -> (ImageOracle, Dataset) {
    let r = Renderer::new("color:cyclic:3,shape:categorical:3,pos_x:ordinal:4".parse().unwrap(), Default::default()).unwrap();
    let d = Dataset::generate(&r);
    (ImageOracle::new(r), d)
}

/// Reads the label back off the image exactly.
struct Lookup<'a>(&'a ImageOracle);

impl Labeler for Lookup<'_> {
    fn label(&self, images: &Tensor<f32>) -> Result<Vec<Vec<HeadOutput>>, EdtError> {
        let space = self.0.renderer().space();
        Ok(self
            .0
            .nearest(images)
            .into_iter()
            .map(|id| {
                let y = space.decode(id);
                space
                    .factors()
                    .iter()
                    .zip(y.values())
                    .map(|(f, &v)| if f.kind().is_classification() { HeadOutput::Class(v) } else { HeadOutput::Scalar(normalize(v, f.cardinality() - 1)) })
                    .collect()
            })
            .collect())
    }
}

/// Class 0 for every classification factor, 0.5 for every ordinal one.
struct Constant(usize);

impl Labeler for Constant {
    fn label(&self, images: &Tensor<f32>) -> Result<Vec<Vec<HeadOutput>>, EdtError> {
        Ok(vec![vec![HeadOutput::Class(0), HeadOutput::Class(0), HeadOutput::Scalar(0.5)]; images.rows()]
            .into_iter()
            .map(|mut r| {
                r.truncate(self.0);
                r
            })
            .collect())
    }
}

fn all_train(d: &Dataset) -> SplitMask {
    SplitMask::new(SplitScheme::Rand { rho: 1.0 }, 0, d.len(), (0..d.len()).collect()).unwrap()
}

#[test]
fn exact_labeler_scores_zero() {
    let (oracle, d) = small();
    let mask = SplitMask::build(d.space(), &SplitScheme::Rand { rho: 0.5 }, 2).unwrap();
    for side in [Side::Train, Side::Test] {
        let r = evaluate(&Lookup(&oracle), &d, &mask, side).unwrap();
        assert!(r.scores.iter().all(|s| s.value == 0.0), "{r:?}");
        assert_eq!(r.side, side);
    }
}

#[test]
fn constant_labeler_matches_hand_computed_rates() {
    let (_, d) = small();
    let r = evaluate(&Constant(3), &d, &all_train(&d), Side::Train).unwrap();
    assert!((r.get("color").unwrap() - 200.0 / 3.0).abs() < 1e-9);
    assert!((r.get("shape").unwrap() - 200.0 / 3.0).abs() < 1e-9);
    // positions 0, 1/3, 2/3, 1 against 0.5
    let expected = 100.0 * [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0].iter().map(|v: &f64| (v - 0.5).powi(2)).sum::<f64>() / 4.0;
    assert!((r.get("pos_x").unwrap() - expected).abs() < 1e-9);
    assert_eq!(r.scores[2].metric, Metric::Mse);
    assert_eq!(r.scores[0].metric, Metric::Error);
}

#[test]
fn empty_side_and_head_mismatch_are_errors() {
    let (_, d) = small();
    assert!(matches!(evaluate(&Constant(3), &d, &all_train(&d), Side::Test), Err(EvalError::EmptySide(Side::Test))));
    assert!(matches!(evaluate(&Constant(2), &d, &all_train(&d), Side::Train), Err(EvalError::Heads { expected: 3, got: 2 })));
}

#[test]
fn metrics_ignore_instance_order() {
    let (oracle, d) = small();
    let mut shuffled = d.instances().to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    let e = Dataset::new(d.space().clone(), shuffled).unwrap();
    let mask = SplitMask::build(d.space(), &SplitScheme::Rand { rho: 0.4 }, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = Predictor::<f32>::new(oracle.renderer().space(), &[PIXELS, 8], &mut rng);
    let a = evaluate(&p, &d, &mask, Side::Test).unwrap();
    let b = evaluate(&p, &e, &mask, Side::Test).unwrap();
    for (x, y) in a.scores.iter().zip(&b.scores) {
        assert!((x.value - y.value).abs() < 1e-9);
    }
}

#[test]
fn summary_matches_direct_formula() {
    let xs = [4.0, 5.5, 3.25, 6.0, 4.75];
    let s = Summary::of(&xs).unwrap();
    let mean = 23.5 / 5.0;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
    assert!((s.mean - mean).abs() < 1e-12 && (s.std - var.sqrt()).abs() < 1e-12);
    assert_eq!(Summary::of(&[2.0]).unwrap().std, 0.0);
    assert!(Summary::of(&[]).is_none());
    assert_eq!(Summary { mean: 4.554, std: 0.2071, n: 5 }.to_string(), "4.55 (0.21)");
}

fn run(seed: u64, scores: &[(Arm, f64)]) -> SeedRun {
    let outcomes = scores
        .iter()
        .map(|&(arm, v)| ArmOutcome {
            arm,
            test: Ok(MetricsRecord {
                arm: arm.key().into(),
                split: "axis".into(),
                seed,
                side: Side::Test,
                scores: vec![FactorScore { factor: "shape".into(), metric: Metric::Error, value: v }],
            }),
            train: None,
        })
        .collect();
    SeedRun { seed, outcomes, laws_regularized: None, laws_unregularized: None }
}

#[test]
fn table_reduces_orders_and_flags_best() {
    let runs = vec![
        run(0, &[(Arm::Erm, 30.0), (Arm::EdtL0L3, 20.0), (Arm::EdtFull, 10.0), (Arm::EdtOracle, 5.0)]),
        run(1, &[(Arm::Erm, 32.0), (Arm::EdtL0L3, 22.0), (Arm::EdtFull, 12.0), (Arm::EdtOracle, 1.0)]),
    ];
    let t = AblationTable::reduce(&Arm::ALL, &runs);
    assert_eq!(t.columns, vec!["shape".to_string()]);
    assert_eq!(t.mean(Arm::Erm, "shape"), Some(31.0));
    assert_eq!(t.best("shape"), Some(Arm::EdtOracle));
    assert!(t.ordering("shape").unwrap().holds);
    assert_eq!(t.oracle_bound("shape"), Some(true));
    let text = t.to_string();
    assert!(text.contains("3.00 (2.83)*"), "{text}");
    assert!(text.contains("31.00 (1.41) "), "{text}");
}

#[test]
fn failed_seed_marks_the_row() {
    let mut runs = vec![run(0, &[(Arm::Erm, 30.0), (Arm::EdtFull, 40.0)])];
    runs[0].outcomes[1].test = Err("no pairs".into());
    let t = AblationTable::reduce(&[Arm::Erm, Arm::EdtFull], &runs);
    assert!(t.rows[1].cells.is_none());
    assert!(t.ordering("shape").is_none());
    assert!(t.to_string().contains("failed: no pairs"));
}

#[test]
fn arm_keys_round_trip() {
    for a in Arm::ALL {
        assert_eq!(a.key().parse::<Arm>().unwrap(), a);
    }
    assert!("edt-l1".parse::<Arm>().is_err());
}
