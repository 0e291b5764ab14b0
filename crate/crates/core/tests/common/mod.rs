#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use respverify::config::{AuditSettings, Config, ConfigFile, Mode};
use respverify::intervention::{
    Comparator, ConstraintKind, FeatureSpec, InterventionModelSpec, JointConstraintSpec, Sign,
    ValueType,
};
use respverify::model_io::{LinearModel, Link, ModelSpec, PredictionTarget};
use serde_json::{json, Value};

pub fn int(name: &str, lb: f64, ub: f64) -> FeatureSpec {
    FeatureSpec::new(name, ValueType::Integer, lb, ub)
}

pub fn bin(name: &str) -> FeatureSpec {
    FeatureSpec::binary(name)
}

pub fn up(f: FeatureSpec) -> FeatureSpec {
    f.with_sign(Sign::IncreaseOnly)
}

pub fn constraint(kind: ConstraintKind, members: &[&str], parameters: Value) -> JointConstraintSpec {
    JointConstraintSpec {
        kind,
        members: members.iter().map(|s| s.to_string()).collect(),
        parameters,
    }
}

pub const GERMAN_IMMUTABLE_BINARY: [&str; 24] = [
    "Male",
    "Single",
    "ForeignWorker",
    "Housing_Renter",
    "Housing_Owner",
    "Housing_Free",
    "Job_Unskilled",
    "Job_Skilled",
    "Job_Management",
    "CreditAmtGeq1000",
    "CreditAmtGeq2000",
    "CreditAmtGeq5000",
    "CreditAmtGeq10000",
    "LoanDurationLeq6",
    "LoanDurationGeq12",
    "LoanDurationGeq24",
    "LoanDurationGeq36",
    "LoanRequiredForBusiness",
    "LoanRequiredForEducation",
    "LoanRequiredForCar",
    "LoanRequiredForHome",
    "NoCreditHistory",
    "HistoryOfLatePayments",
    "HistoryOfDelinquency",
];

/// Intervention model of the processed german credit data: 36 features,
/// two linkages into Age and two thermometer pairs.
pub fn german_spec() -> InterventionModelSpec {
    let mut features = vec![
        int("Age", 19.0, 75.0).immutable(),
        up(int("YearsAtResidence", 0.0, 7.0)),
        up(bin("YearsEmployedGeq1")),
        up(bin("CheckingAcct_exists")),
        up(bin("CheckingAcctGeq0")),
        up(bin("SavingsAcct_exists")),
        up(bin("SavingsAcctGeq100")),
    ];
    for name in &GERMAN_IMMUTABLE_BINARY[..3] {
        features.push(bin(name).immutable());
    }
    features.push(int("LiablePersons", 1.0, 2.0).immutable());
    for name in &GERMAN_IMMUTABLE_BINARY[3..17] {
        features.push(bin(name).immutable());
    }
    features.push(int("LoanRate", 1.0, 4.0).immutable());
    features.push(up(bin("HasGuarantor")));
    for name in &GERMAN_IMMUTABLE_BINARY[17..] {
        features.push(bin(name).immutable());
    }
    features.push(up(bin("HistoryOfBankInstallments")));
    features.push(up(bin("HistoryOfStoreInstallments")));

    let linkage = |src: &str| {
        constraint(
            ConstraintKind::DirectionalLinkage,
            &[src, "Age"],
            json!({"source": src, "targets": ["Age"], "scale": [1.0]}),
        )
    };
    let thermo = |a: &str, b: &str| {
        constraint(
            ConstraintKind::ThermometerEncoding,
            &[a, b],
            json!({"reachability": "upper"}),
        )
    };
    InterventionModelSpec {
        features,
        constraints: vec![
            linkage("YearsAtResidence"),
            linkage("YearsEmployedGeq1"),
            thermo("CheckingAcct_exists", "CheckingAcctGeq0"),
            thermo("SavingsAcct_exists", "SavingsAcctGeq100"),
        ],
        downstream: vec!["Age".into()],
    }
}

/// A consistent german-like point: one-hot groups and thermometer pairs
/// take valid codes.
pub fn german_point(spec: &InterventionModelSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = vec![0.0; spec.features.len()];
    let idx = |name: &str| spec.feature_index(name).unwrap();
    let mut set = |name: &str, v: f64| x[idx(name)] = v;
    set("Age", rng.random_range(19..=75) as f64);
    set("YearsAtResidence", rng.random_range(0..=7) as f64);
    set("YearsEmployedGeq1", f64::from(rng.random_bool(0.6)));
    for (a, b) in [
        ("CheckingAcct_exists", "CheckingAcctGeq0"),
        ("SavingsAcct_exists", "SavingsAcctGeq100"),
    ] {
        let code = rng.random_range(0..3);
        set(a, f64::from(code >= 1));
        set(b, f64::from(code >= 2));
    }
    for name in ["Male", "Single", "ForeignWorker", "HasGuarantor", "NoCreditHistory"] {
        set(name, f64::from(rng.random_bool(0.3)));
    }
    set("HistoryOfLatePayments", f64::from(rng.random_bool(0.25)));
    set("HistoryOfDelinquency", f64::from(rng.random_bool(0.2)));
    set("HistoryOfBankInstallments", f64::from(rng.random_bool(0.2)));
    set("HistoryOfStoreInstallments", f64::from(rng.random_bool(0.1)));
    set("LiablePersons", rng.random_range(1..=2) as f64);
    set("LoanRate", rng.random_range(1..=4) as f64);
    for group in [
        &["Housing_Renter", "Housing_Owner", "Housing_Free"][..],
        &["Job_Unskilled", "Job_Skilled", "Job_Management"][..],
        &[
            "LoanRequiredForBusiness",
            "LoanRequiredForEducation",
            "LoanRequiredForCar",
            "LoanRequiredForHome",
        ][..],
    ] {
        set(group.choose(rng).unwrap(), 1.0);
    }
    let amount = rng.random_range(0..=4);
    for (k, name) in ["CreditAmtGeq1000", "CreditAmtGeq2000", "CreditAmtGeq5000", "CreditAmtGeq10000"]
        .iter()
        .enumerate()
    {
        set(name, f64::from(amount > k));
    }
    let duration = rng.random_range(0..=4);
    set("LoanDurationLeq6", f64::from(duration == 0));
    for (k, name) in ["LoanDurationGeq12", "LoanDurationGeq24", "LoanDurationGeq36"]
        .iter()
        .enumerate()
    {
        set(name, f64::from(duration > k + 1));
    }
    x
}

/// Logistic lending model over the german features: approval ("1") needs
/// score >= 0.5.
pub fn german_lender(spec: &InterventionModelSpec) -> LinearModel {
    let weight_of = |name: &str| match name {
        "Age" => 0.02,
        "YearsAtResidence" => 0.12,
        "YearsEmployedGeq1" => 0.5,
        "CheckingAcct_exists" => 0.35,
        "CheckingAcctGeq0" => 0.6,
        "SavingsAcct_exists" => 0.25,
        "SavingsAcctGeq100" => 0.55,
        "HasGuarantor" => 0.7,
        "HistoryOfBankInstallments" => 0.3,
        "HistoryOfStoreInstallments" => 0.25,
        "HistoryOfDelinquency" => -4.0,
        "HistoryOfLatePayments" => -1.2,
        "NoCreditHistory" => -0.6,
        "Housing_Owner" => 0.4,
        "Job_Management" => 0.3,
        "Job_Unskilled" => -0.3,
        "ForeignWorker" => -0.2,
        "LoanRate" => -0.25,
        "CreditAmtGeq1000" | "CreditAmtGeq2000" | "CreditAmtGeq5000" | "CreditAmtGeq10000" => -0.3,
        "LoanDurationGeq12" | "LoanDurationGeq24" | "LoanDurationGeq36" => -0.35,
        _ => 0.0,
    };
    let weights = spec.features.iter().map(|f| weight_of(&f.name)).collect();
    LinearModel::new(weights, -1.2, Link::Logistic).with_threshold(0.5)
}

/// German intervention model with the synthetic lender, auditing denied
/// applicants against a flip target.
pub fn german_config(audit: AuditSettings) -> Config {
    let spec = german_spec();
    let file = ConfigFile {
        model: Some(ModelSpec::BuiltinLinear(german_lender(&spec))),
        target: Some(PredictionTarget::FlipOfCurrent),
        features: spec.features,
        constraints: spec.constraints,
        downstream: spec.downstream,
        effects: vec![],
        audit,
    };
    let text = serde_json::to_string(&file).unwrap();
    Config::from_json_str(&text).unwrap()
}

pub fn denied_filter() -> PredictionTarget {
    PredictionTarget::LabelSet {
        labels: vec!["0".into()],
    }
}

pub fn audit_settings(mode: Mode, n: u64, epsilon: f64) -> AuditSettings {
    AuditSettings {
        mode,
        n: Some(n),
        epsilon: Some(epsilon),
        ..Default::default()
    }
}

/// A small discrete model with at least one constraint of every kind, plus
/// an origin point consistent with it.
#[derive(Debug, Clone)]
pub struct RandomModel {
    pub spec: InterventionModelSpec,
    pub x: Vec<f64>,
}

pub fn random_discrete_model(rng: &mut ChaCha8Rng) -> RandomModel {
    let mut features = Vec::new();
    let mut constraints = Vec::new();
    let mut x = Vec::new();
    let sign = |rng: &mut ChaCha8Rng| match rng.random_range(0..3) {
        0 => Sign::Free,
        1 => Sign::IncreaseOnly,
        _ => Sign::DecreaseOnly,
    };

    // thermometer over 2-3 dummies
    let m = rng.random_range(2..=3);
    let names: Vec<String> = (0..m).map(|k| format!("t{k}")).collect();
    let code = rng.random_range(0..=m);
    for (k, n) in names.iter().enumerate() {
        features.push(bin(n));
        x.push(f64::from(k < code));
    }
    let shape = ["upper", "lower", "all"][rng.random_range(0..3)];
    constraints.push(constraint(
        ConstraintKind::ThermometerEncoding,
        &names.iter().map(String::as_str).collect::<Vec<_>>(),
        json!({ "reachability": shape }),
    ));

    // if flag == v then count op c
    let flag_sign = sign(rng);
    features.push(bin("flag").with_sign(flag_sign));
    x.push(f64::from(rng.random_bool(0.5)));
    let count_ub = rng.random_range(3..=6) as f64;
    features.push(int("count", 0.0, count_ub).with_sign(sign(rng)));
    let cmp = [Comparator::Gt, Comparator::Le, Comparator::Ne, Comparator::Ge][rng.random_range(0..4)];
    let c = rng.random_range(1..=2) as f64;
    let flag_v = f64::from(rng.random_bool(0.5));
    // pick an origin that satisfies the rule
    let mut count_x;
    loop {
        count_x = rng.random_range(0..=count_ub as i64) as f64;
        if x[m] != flag_v || cmp.holds(count_x, c) {
            break;
        }
    }
    x.push(count_x);
    constraints.push(constraint(
        ConstraintKind::IfThen,
        &["flag", "count"],
        json!({
            "antecedent": {"feature": "flag", "comparator": "eq", "value": flag_v},
            "consequent": {"feature": "count", "comparator": cmp, "value": c},
        }),
    ));

    // linkage source -> downstream target
    let src_ub = rng.random_range(2..=4) as f64;
    features.push(int("src", 0.0, src_ub).with_sign(sign(rng)));
    x.push(rng.random_range(0..=src_ub as i64) as f64);
    let tgt_ub = 6.0;
    features.push(int("tgt", 0.0, tgt_ub).immutable());
    x.push(rng.random_range(0..=6) as f64);
    let scale = [1.0, -1.0, 0.5, 2.0][rng.random_range(0..4)];
    constraints.push(constraint(
        ConstraintKind::DirectionalLinkage,
        &["src", "tgt"],
        json!({"source": "src", "targets": ["tgt"], "scale": [scale]}),
    ));

    // one-hot group of 3 with a random reachability matrix
    let k = 3;
    let mut e = vec![vec![0u8; k]; k];
    for (i, row) in e.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = u8::from(i == j || rng.random_bool(0.5));
        }
    }
    let current = rng.random_range(0..k);
    for j in 0..k {
        features.push(bin(&format!("oh{j}")));
        x.push(f64::from(j == current));
    }
    let values: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| f64::from(i == j)).collect())
        .collect();
    constraints.push(constraint(
        ConstraintKind::EnumeratedReachability,
        &["oh0", "oh1", "oh2"],
        json!({"values": values, "reachability": e}),
    ));

    // a few unconstrained features
    for j in 0..rng.random_range(0..=2) {
        let ub = rng.random_range(1..=3) as f64;
        features.push(int(&format!("free{j}"), 0.0, ub).with_sign(sign(rng)));
        x.push(rng.random_range(0..=ub as i64) as f64);
    }

    RandomModel {
        spec: InterventionModelSpec {
            features,
            constraints,
            downstream: vec!["tgt".into()],
        },
        x,
    }
}

/// Direct evaluation of every declared constraint on x + a (plus the
/// linked changes), written against the declared form so it shares no code
/// with the compiled checker.
pub fn oracle_feasible(spec: &InterventionModelSpec, x: &[f64], a: &[f64]) -> bool {
    let idx = |n: &str| spec.feature_index(n).unwrap();
    let post = oracle_post(spec, x, a);
    spec.constraints.iter().all(|c| {
        let members: Vec<usize> = c.members.iter().map(|m| idx(m)).collect();
        if members.iter().all(|&j| post[j] == x[j]) {
            return true;
        }
        let p = &c.parameters;
        match c.kind {
            ConstraintKind::DirectionalLinkage => members[1..]
                .iter()
                .all(|&t| post[t] >= spec.features[t].lb && post[t] <= spec.features[t].ub),
            ConstraintKind::IfThen => {
                let cond = |v: &Value| {
                    let lhs = post[idx(v["feature"].as_str().unwrap())];
                    let rhs = v["value"].as_f64().unwrap();
                    match v["comparator"].as_str().unwrap() {
                        "eq" => lhs == rhs,
                        "ne" => lhs != rhs,
                        "lt" => lhs < rhs,
                        "le" => lhs <= rhs,
                        "gt" => lhs > rhs,
                        "ge" => lhs >= rhs,
                        other => panic!("{other}"),
                    }
                };
                !cond(&p["antecedent"]) || cond(&p["consequent"])
            }
            ConstraintKind::ThermometerEncoding | ConstraintKind::EnumeratedReachability => {
                let values: Vec<Vec<f64>> = if c.kind == ConstraintKind::ThermometerEncoding {
                    let m = members.len();
                    (0..=m).map(|k| (0..m).map(|j| f64::from(j < k)).collect()).collect()
                } else {
                    serde_json::from_value(p["values"].clone()).unwrap()
                };
                let size = values.len();
                let e: Vec<Vec<u8>> = match &p["reachability"] {
                    Value::String(s) => (0..size)
                        .map(|i| {
                            (0..size)
                                .map(|j| {
                                    u8::from(match s.as_str() {
                                        "upper" => j >= i,
                                        "lower" => j <= i,
                                        "all" => true,
                                        _ => i == j,
                                    })
                                })
                                .collect()
                        })
                        .collect(),
                    other => serde_json::from_value(other.clone()).unwrap(),
                };
                let find = |v: &[f64]| {
                    values
                        .iter()
                        .position(|t| t.iter().zip(&members).all(|(tv, &j)| v[j] == *tv))
                };
                match (find(x), find(&post)) {
                    (Some(i), Some(k)) => e[i][k] == 1,
                    _ => false,
                }
            }
        }
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn action_allowed(f: &FeatureSpec, downstream: bool, a: f64) -> bool {
    if !f.actionable || downstream {
        return a == 0.0;
    }
    match f.sign {
        Sign::Free => true,
        Sign::IncreaseOnly => a >= 0.0,
        Sign::DecreaseOnly => a <= 0.0,
    }
}

/// Every reachable x' of a discrete model with deterministic linkages, found
/// by walking the whole lattice of intervened features.
pub fn oracle_reachable(spec: &InterventionModelSpec, x: &[f64]) -> BTreeSet<Vec<i64>> {
    let d = spec.features.len();
    let free: Vec<usize> = (0..d)
        .filter(|&j| {
            let f = &spec.features[j];
            f.actionable && !spec.downstream.contains(&f.name)
        })
        .collect();
    let mut out = BTreeSet::new();
    let mut a = vec![0.0; d];
    fn walk(
        k: usize,
        free: &[usize],
        spec: &InterventionModelSpec,
        x: &[f64],
        a: &mut Vec<f64>,
        out: &mut BTreeSet<Vec<i64>>,
    ) {
        if k == free.len() {
            if oracle_feasible(spec, x, a) {
                out.insert(oracle_post(spec, x, a).iter().map(|v| v.round() as i64).collect());
            }
            return;
        }
        let j = free[k];
        let f = &spec.features[j];
        let mut v = f.lb;
        while v <= f.ub {
            a[j] = v - x[j];
            if action_allowed(f, false, a[j]) {
                walk(k + 1, free, spec, x, a, out);
            }
            v += 1.0;
        }
        a[j] = 0.0;
    }
    walk(0, &free, spec, x, &mut a, &mut out);
    out
}

pub fn oracle_post(spec: &InterventionModelSpec, x: &[f64], a: &[f64]) -> Vec<f64> {
    let idx = |n: &str| spec.feature_index(n).unwrap();
    let mut post: Vec<f64> = x.iter().zip(a).map(|(x, a)| x + a).collect();
    for c in &spec.constraints {
        if c.kind == ConstraintKind::DirectionalLinkage {
            let s = idx(c.parameters["source"].as_str().unwrap());
            let targets = c.parameters["targets"].as_array().unwrap();
            let scales = c.parameters["scale"].as_array().unwrap();
            for (t, sc) in targets.iter().zip(scales) {
                let t = idx(t.as_str().unwrap());
                let raw = sc.as_f64().unwrap() * a[s];
                post[t] += if spec.features[t].vtype == ValueType::Real {
                    raw
                } else {
                    (raw + 1e-9).floor()
                };
            }
        }
    }
    post
}

/// Checks the action bounds of every feature (sign, actionability, feature
/// range after the action).
pub fn oracle_bounds(spec: &InterventionModelSpec, x: &[f64], a: &[f64]) -> bool {
    spec.features.iter().enumerate().all(|(j, f)| {
        let downstream = spec.downstream.contains(&f.name);
        action_allowed(f, downstream, a[j]) && x[j] + a[j] >= f.lb && x[j] + a[j] <= f.ub
    })
}

/// Pearson goodness-of-fit p-value of `counts` against the uniform law.
pub fn uniform_p_value(counts: &[u64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    if counts.len() < 2 {
        return 1.0;
    }
    ChiSquared::new((counts.len() - 1) as f64).unwrap().sf(stat)
}

/// Tallies sampled x' against the enumerated reachable set; panics on a
/// point outside it.
pub fn tally(reach: &[Vec<f64>], sampled: impl IntoIterator<Item = Vec<f64>>) -> Vec<u64> {
    let key = |v: &[f64]| v.iter().map(|c| c.to_bits()).collect::<Vec<_>>();
    let index: std::collections::HashMap<_, _> =
        reach.iter().enumerate().map(|(i, v)| (key(v), i)).collect();
    let mut counts = vec![0u64; reach.len()];
    for p in sampled {
        let i = index.get(&key(&p)).unwrap_or_else(|| panic!("{p:?} is not reachable"));
        counts[*i] += 1;
    }
    counts
}

pub const LIVER_SIGMA: [[f64; 4]; 4] = [
    [1.0, 0.447, 0.320, -0.257],
    [0.447, 1.0, 0.370, -0.043],
    [0.320, 0.370, 1.0, -0.091],
    [-0.257, -0.043, -0.091, 1.0],
];

/// Liver-panel configuration: a binary treatment plus four lab values moved
/// by a structural causal model with correlated exogenous noise.
pub fn liver_config_json() -> Value {
    json!({
        "features": [
            {"name": "treated", "vtype": "binary", "lb": 0, "ub": 1, "actionable": true},
            {"name": "bilirubin", "vtype": "real", "lb": 0, "ub": 1000, "actionable": false},
            {"name": "sodium", "vtype": "real", "lb": 100, "ub": 200, "actionable": false},
            {"name": "inr", "vtype": "real", "lb": 0.5, "ub": 5, "actionable": false},
            {"name": "creatinine", "vtype": "real", "lb": 0, "ub": 1000, "actionable": false}
        ],
        "downstream": ["bilirubin", "sodium", "inr", "creatinine"],
        "effects": [{
            "kind": "SCM",
            "variables": ["bilirubin", "sodium", "inr", "creatinine"],
            "sigma": LIVER_SIGMA,
            "equations": [
                {"g": "exp", "c1": 0.5, "c0": 3.5, "lo": 15, "hi": 200},
                {"g": "identity", "c1": 5, "c0": 137, "lo": 125, "hi": 145},
                {"g": "exp_plus_offset", "c1": 0.3, "c0": -0.2, "offset": 0.8, "lo": 0.9, "hi": 2.4},
                {"g": "exp", "c1": 0.4, "c0": 4.2, "lo": 45, "hi": 200}
            ]
        }]
    })
}

/// Pearson correlation of two equally long columns.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Writes `config.json` and `data.csv` for the german model into `dir`.
pub fn write_german_fixture(
    dir: &std::path::Path,
    audit: AuditSettings,
    rows: usize,
    seed: u64,
) -> (std::path::PathBuf, std::path::PathBuf) {
    let cfg = german_config(audit);
    let config = dir.join("config.json");
    std::fs::write(&config, serde_json::to_string_pretty(&cfg.file).unwrap()).unwrap();
    let spec = german_spec();
    let data = dir.join("data.csv");
    let mut w = csv::Writer::from_path(&data).unwrap();
    let mut header = vec!["id".to_string()];
    header.extend(spec.features.iter().map(|f| f.name.clone()));
    w.write_record(&header).unwrap();
    let mut r = rng(seed);
    for i in 0..rows {
        let x = german_point(&spec, &mut r);
        let mut row = vec![format!("a{i}")];
        row.extend(x.iter().map(|v| v.to_string()));
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
    (config, data)
}
