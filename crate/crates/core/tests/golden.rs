use mpp_core::laws::FddEvaluator;
use mpp_core::mixing::{pushforward, MixingLaw, RateLaw, Transform};
use mpp_core::FddQuery;

fn law(spec: &str) -> RateLaw {
    let mut it = spec.split_whitespace();
    let name = it.next().unwrap();
    let rest: Vec<&str> = it.collect();
    let p = |i: usize| rest[i].parse::<f64>().unwrap();
    match name {
        "gamma" => MixingLaw::Gamma { alpha: p(0), beta: p(1) }.into(),
        "lognormal" => MixingLaw::LogNormal { mu: p(0), sigma2: p(1) }.into(),
        "reciprocal_inverse_gamma" => {
            pushforward(MixingLaw::InverseGamma { alpha: p(0), beta: p(1) }, Transform::Reciprocal).unwrap().into()
        }
        "exp_normal" => pushforward(MixingLaw::Normal { mean: p(0), variance: p(1) }, Transform::Exp).unwrap().into(),
        "discrete" => MixingLaw::Discrete {
            atoms: rest
                .iter()
                .map(|a| {
                    let (x, w) = a.split_once(':').unwrap();
                    (x.parse().unwrap(), w.parse().unwrap())
                })
                .collect(),
        }
        .into(),
        other => panic!("unknown law {other}"),
    }
}

#[test]
fn quadrature_matches_high_precision_reference() {
    let text = include_str!("fixtures/golden_fdd.txt");
    let mut checked = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split('|').map(str::trim).collect();
        let times = fields[1].split_whitespace().map(|x| x.parse().unwrap()).collect();
        let counts = fields[2].split_whitespace().map(|x| x.parse().unwrap()).collect();
        let expected: f64 = fields[3].parse().unwrap();
        let q = FddQuery::new(times, counts).unwrap();
        let got = FddEvaluator::quadrature(law(fields[0])).evaluate(&q).unwrap();
        assert!((got.value - expected).abs() <= 1e-10 * expected.max(1e-3), "{line}: got {}", got.value);
        checked += 1;
    }
    assert_eq!(checked, 25);
}
