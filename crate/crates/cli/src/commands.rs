//! The four subcommands. Each returns the lines to print on success.

use std::path::{Path, PathBuf};

use activefair::data::{load_csv, Dataset, Group, GroupSel, Schema};
use activefair::experiments::{
    dominance_report, emit_report, equal_opportunity_comparison, filter_equal_odds,
    prepare_with_forest, read_points, sweep_group_budgets, sweep_individual, sweep_randomized,
    tune_early_stop, write_json, write_points, DominanceReport, Experiment, ExperimentConfig,
    ExperimentError, Family, Manifest, RegionResult, Solution, SweepConfig, SweepContext,
};
use activefair::forest::Forest;
use activefair::metrics::{
    auc, calibration_bins, calibration_line_deviation, class_counts, equal_cost, generalized_rates,
    pareto_front, rates, CalibrationReport, Design, DisparityReport, EqualCost, GroupPoint,
    OperatingPoint, DEFAULT_TOLERANCE,
};
use activefair::policy::{
    classify_group_budget, mean_budget, run_inquiries, GroupBudgetPolicy, IndividualPolicy,
    TraceRecord,
};
use activefair::seed::{derive_seed, SPLIT, TRAIN};
use serde::Serialize;

use crate::settings::{FamilyChoice, PolicyKind, Settings};
use crate::CliError;

const TOOL: &str = "activefair";
const VERSION: &str = env!("CARGO_PKG_VERSION");

fn classify(e: ExperimentError) -> CliError {
    match e {
        ExperimentError::Data(_) => CliError::input(e),
        ExperimentError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        _ => CliError::failed(e),
    }
}

fn load_dataset(s: &Settings) -> Result<Dataset, CliError> {
    let data_path = s.data_path()?;
    let schema = Schema::load(&s.schema_path()?).map_err(CliError::input)?;
    load_csv(data_path, &schema).map_err(CliError::input)
}

fn prepare(s: &Settings) -> Result<(Dataset, ExperimentConfig, Experiment), CliError> {
    let data = load_dataset(s)?;
    let config = s.experiment_config()?;
    let forest = match &s.forest {
        Some(path) => Some(Forest::load(path).map_err(CliError::input)?),
        None => None,
    };
    let exp = prepare_with_forest(&data, &config, forest).map_err(classify)?;
    Ok((data, config, exp))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Failed(format!("cannot create {}: {e}", dir.display())))
}

fn group_base_rates(ds: &Dataset) -> Result<[f64; 2], CliError> {
    let rate = |g| ds.base_rate(GroupSel::Only(g)).map_err(CliError::failed);
    Ok([rate(Group::A)?, rate(Group::B)?])
}

fn full_scores(forest: &Forest, ds: &Dataset) -> Vec<f64> {
    (0..ds.n_rows())
        .map(|i| forest.predict_full(ds.row(i)))
        .collect()
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, Serialize)]
struct BaseRates {
    overall: f64,
    a: f64,
    b: f64,
}

#[derive(Debug, Serialize)]
struct FeatureImportance {
    feature: String,
    importance: f64,
}

#[derive(Debug, Serialize)]
struct TrainReport {
    tool: &'static str,
    version: &'static str,
    dataset: String,
    n_rows: usize,
    n_features: usize,
    groups: [String; 2],
    group_threshold: Option<f64>,
    seed: u64,
    split_seed: u64,
    forest_seed: u64,
    split_fraction: f64,
    validation_fraction: f64,
    n_fit: usize,
    n_validation: usize,
    n_test: usize,
    base_rates: BaseRates,
    train_base_rates: [f64; 2],
    test_base_rates: [f64; 2],
    test_auc: Option<f64>,
    test_auc_by_group: [Option<f64>; 2],
    /// Features by descending importance.
    importances: Vec<FeatureImportance>,
    constant_forest: bool,
}

pub fn train(s: &Settings) -> Result<Vec<String>, CliError> {
    let (_, config, exp) = prepare(s)?;
    let out = s.out_dir();
    create_dir(&out)?;
    let forest_path = out.join("forest.json");
    exp.forest.save(&forest_path).map_err(CliError::failed)?;

    let ds = &exp.dataset;
    let scores = full_scores(&exp.forest, &exp.test);
    let group_auc = |g: Group| {
        let idx: Vec<usize> = (0..exp.test.n_rows())
            .filter(|&i| exp.test.groups()[i] == g)
            .collect();
        let sc: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let lb: Vec<u8> = idx.iter().map(|&i| exp.test.labels()[i]).collect();
        auc(&sc, &lb).ok()
    };
    let sensitive = &ds.schema().sensitive;
    let names = ds.schema().feature_names();
    let report = TrainReport {
        tool: TOOL,
        version: VERSION,
        dataset: s.data_path()?.display().to_string(),
        n_rows: ds.n_rows(),
        n_features: ds.n_features(),
        groups: [sensitive.group_a.clone(), sensitive.group_b.clone()],
        group_threshold: ds.group_threshold(),
        seed: config.seed,
        split_seed: derive_seed(config.seed, SPLIT),
        forest_seed: derive_seed(config.seed, TRAIN),
        split_fraction: config.split_fraction,
        validation_fraction: config.validation_fraction,
        n_fit: exp.fit.n_rows(),
        n_validation: exp.validation.n_rows(),
        n_test: exp.test.n_rows(),
        base_rates: BaseRates {
            overall: ds.base_rate(GroupSel::All).map_err(CliError::failed)?,
            a: ds
                .base_rate(GroupSel::Only(Group::A))
                .map_err(CliError::failed)?,
            b: ds
                .base_rate(GroupSel::Only(Group::B))
                .map_err(CliError::failed)?,
        },
        train_base_rates: exp.train_base_rates,
        test_base_rates: group_base_rates(&exp.test)?,
        test_auc: auc(&scores, exp.test.labels()).ok(),
        test_auc_by_group: [group_auc(Group::A), group_auc(Group::B)],
        importances: exp
            .forest
            .feature_importance()
            .into_iter()
            .map(|j| FeatureImportance {
                feature: names[j].clone(),
                importance: exp.forest.importances()[j],
            })
            .collect(),
        constant_forest: exp.forest.is_constant(),
    };
    let report_path = out.join("train_report.json");
    write_json(&report_path, &report).map_err(CliError::failed)?;

    let mut lines = vec![
        format!("wrote {}", forest_path.display()),
        format!("wrote {}", report_path.display()),
    ];
    if let Some(a) = report.test_auc {
        lines.push(format!("test AUC {a:.4}"));
    }
    if report.constant_forest {
        eprintln!("warning: every tree is a single leaf; scores are constant");
    }
    Ok(lines)
}

// ---------------------------------------------------------------------------
// audit

#[derive(Debug, Serialize)]
struct GroupCalibration {
    group: String,
    /// Distance of the generalized rates from the group's calibration line.
    line_deviation: f64,
    bins: CalibrationReport,
}

#[derive(Debug, Serialize)]
struct AuditReport {
    tool: &'static str,
    version: &'static str,
    dataset: String,
    seed: u64,
    point: OperatingPoint,
    pooled_fpr: f64,
    pooled_fnr: f64,
    disparity: DisparityReport,
    equal_cost: EqualCost,
    calibration: [GroupCalibration; 2],
}

pub fn audit(s: &Settings) -> Result<Vec<String>, CliError> {
    let (_, config, exp) = prepare(s)?;
    let test = &exp.test;
    let d = test.n_features();
    let threshold = s.threshold.unwrap_or(0.5);
    let out = s.out_dir();
    create_dir(&out)?;
    let mut lines = Vec::new();

    let (design, scores, decisions, budgets) = match s.policy.unwrap_or(PolicyKind::Group) {
        PolicyKind::Group => {
            let policy = GroupBudgetPolicy {
                budget_a: s.budget_a.unwrap_or(d),
                budget_b: s.budget_b.unwrap_or(d),
                threshold,
            };
            let c = classify_group_budget(&exp.forest, &exp.strategy, test, &policy)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let design = Design::Group {
                budget_a: policy.budget_a,
                budget_b: policy.budget_b,
                threshold,
            };
            (design, c.scores, c.decisions, c.budgets)
        }
        PolicyKind::Individual => {
            let policy = IndividualPolicy::new(
                s.alpha_low.unwrap_or(0.3),
                s.alpha_high.unwrap_or(0.7),
                threshold,
            )
            .and_then(|p| {
                p.with_early_stop(
                    s.early_stop_eps.unwrap_or(0.0),
                    s.early_stop_window.unwrap_or(1),
                )
            })
            .map_err(|e| CliError::Usage(e.to_string()))?;
            let traces = run_inquiries(&exp.forest, &exp.strategy, test, &policy)
                .map_err(CliError::failed)?;
            let path = out.join("traces.jsonl");
            let mut text = String::new();
            for (i, t) in traces.iter().enumerate() {
                let record = TraceRecord {
                    row: exp.split.test[i],
                    group: test.groups()[i],
                    budget: t.budget(),
                    trace: t.clone(),
                };
                text.push_str(&serde_json::to_string(&record).expect("serializable"));
                text.push('\n');
            }
            std::fs::write(&path, text)
                .map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))?;
            lines.push(format!("wrote {}", path.display()));
            let design = Design::Individual {
                alpha_low: policy.alpha_low,
                alpha_high: policy.alpha_high,
                threshold,
                early_stop_eps: policy.early_stop_eps,
            };
            (
                design,
                traces.iter().map(|t| t.final_score()).collect(),
                traces.iter().map(|t| t.decision).collect(),
                traces.iter().map(|t| t.budget()).collect::<Vec<usize>>(),
            )
        }
    };

    let r = rates(&decisions, test.labels(), test.groups()).map_err(CliError::failed)?;
    let g = generalized_rates(&scores, test.labels(), test.groups()).map_err(CliError::failed)?;
    let counts = class_counts(test.labels(), test.groups());
    let point = OperatingPoint {
        design,
        a: GroupPoint::from_rates(&r.a, &g.a),
        b: GroupPoint::from_rates(&r.b, &g.b),
        mean_budget: mean_budget(&budgets),
        n_a: test.group_size(Group::A),
        n_b: test.group_size(Group::B),
        class_counts: counts,
    };
    let tolerance = s.epsilon.unwrap_or(DEFAULT_TOLERANCE);
    let n_bins = s.n_bins.unwrap_or(10);
    let mu = group_base_rates(test)?;
    let sensitive = &test.schema().sensitive;
    let calibration = |grp: Group, name: &str| -> Result<GroupCalibration, CliError> {
        let mask: Vec<bool> = test.groups().iter().map(|&x| x == grp).collect();
        let rates = g.get(grp);
        Ok(GroupCalibration {
            group: name.to_string(),
            line_deviation: calibration_line_deviation(rates.fpr, rates.fnr, mu[grp as usize])
                .map_err(CliError::failed)?,
            bins: calibration_bins(&scores, test.labels(), &mask, n_bins)
                .map_err(|e| CliError::Usage(e.to_string()))?,
        })
    };
    let (pooled_fpr, pooled_fnr) = point.pooled();
    let report = AuditReport {
        tool: TOOL,
        version: VERSION,
        dataset: s.data_path()?.display().to_string(),
        seed: config.seed,
        point,
        pooled_fpr,
        pooled_fnr,
        disparity: point.disparity(tolerance),
        equal_cost: equal_cost(&g, 1.0, 1.0).map_err(CliError::failed)?,
        calibration: [
            calibration(Group::A, &sensitive.group_a)?,
            calibration(Group::B, &sensitive.group_b)?,
        ],
    };
    let path = out.join("audit.json");
    write_json(&path, &report).map_err(CliError::failed)?;
    lines.push(format!("wrote {}", path.display()));
    lines.push(format!(
        "FPR {:.4}/{:.4}  FNR {:.4}/{:.4}  mean budget {:.3}",
        point.a.fpr, point.b.fpr, point.a.fnr, point.b.fnr, point.mean_budget
    ));
    Ok(lines)
}

// ---------------------------------------------------------------------------
// sweep and report

#[derive(Debug, Serialize)]
struct FamilySolutions {
    family: Family,
    n_points: usize,
    n_solutions: usize,
    /// Pareto front of the solutions in pooled `(FPR, FNR)`.
    pooled_frontier: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize)]
struct Comparison {
    first: Family,
    second: Family,
    /// How much of `second`'s frontier some `first` solution weakly dominates;
    /// absent when either set is empty.
    report: Option<DominanceReport>,
}

#[derive(Debug, Serialize)]
struct EqualOddsSummary {
    tolerance: f64,
    b_max: f64,
    families: Vec<FamilySolutions>,
    comparisons: Vec<Comparison>,
}

const COMPARISONS: [(Family, Family); 3] = [
    (Family::Group, Family::Randomized),
    (Family::Individual, Family::Group),
    (Family::Individual, Family::Randomized),
];

fn summarize(
    regions: &[(Family, Vec<OperatingPoint>)],
    tolerance: f64,
    b_max: f64,
) -> (EqualOddsSummary, Vec<Vec<Solution>>) {
    let solutions: Vec<Vec<Solution>> = regions
        .iter()
        .map(|(_, pts)| filter_equal_odds(pts, tolerance, b_max))
        .collect();
    let coords =
        |k: usize| -> Vec<[f64; 2]> { solutions[k].iter().map(Solution::coords).collect() };
    let families = regions
        .iter()
        .enumerate()
        .map(|(k, (family, pts))| {
            let c = coords(k);
            FamilySolutions {
                family: *family,
                n_points: pts.len(),
                n_solutions: c.len(),
                pooled_frontier: pareto_front(&c).into_iter().map(|i| c[i]).collect(),
            }
        })
        .collect();
    let index = |f: Family| regions.iter().position(|(g, _)| *g == f);
    let comparisons = COMPARISONS
        .iter()
        .filter_map(|&(first, second)| {
            let (i, j) = (index(first)?, index(second)?);
            Some(Comparison {
                first,
                second,
                report: dominance_report(&coords(i), &coords(j)).ok(),
            })
        })
        .collect();
    (
        EqualOddsSummary {
            tolerance,
            b_max,
            families,
            comparisons,
        },
        solutions,
    )
}

fn infeasible_families(summary: &EqualOddsSummary) -> Vec<&'static str> {
    summary
        .families
        .iter()
        .filter(|f| f.n_solutions == 0)
        .map(|f| f.family.name())
        .collect()
}

fn summary_lines(summary: &EqualOddsSummary) -> Vec<String> {
    let mut lines: Vec<String> = summary
        .families
        .iter()
        .map(|f| {
            format!(
                "{}: {} points, {} equal-odds solutions",
                f.family.name(),
                f.n_points,
                f.n_solutions
            )
        })
        .collect();
    for c in &summary.comparisons {
        if let Some(r) = &c.report {
            lines.push(format!(
                "{} dominates {}/{} of the {} frontier ({:.0}%)",
                c.first.name(),
                r.dominated,
                r.total,
                c.second.name(),
                100.0 * r.fraction
            ));
        }
    }
    lines
}

fn infeasible(summary: &EqualOddsSummary, lines: &[String], dir: &Path) -> CliError {
    CliError::Infeasible(format!(
        "no equal-odds solution within tolerance {} and mean budget {} for: {} (results in {})\n{}",
        summary.tolerance,
        summary.b_max,
        infeasible_families(summary).join(", "),
        dir.display(),
        lines.join("\n")
    ))
}

pub fn sweep(s: &Settings) -> Result<Vec<String>, CliError> {
    let (data, config, exp) = prepare(s)?;
    let d = exp.test.n_features();
    let b_max = s.b_max.unwrap_or_default().resolve(d);
    let tolerance = s.epsilon.unwrap_or(DEFAULT_TOLERANCE);
    let window = s.early_stop_window.unwrap_or(1);
    let families = s.family.unwrap_or(FamilyChoice::All).families();
    let equal_odds = s.equal_odds.unwrap_or(false);

    let early_stop = match (families.contains(&Family::Individual), s.early_stop_eps) {
        (true, None) => Some(tune_early_stop(&exp, b_max, window).map_err(classify)?),
        _ => None,
    };
    let sweep = SweepConfig {
        tolerance,
        b_max,
        early_stop_eps: s
            .early_stop_eps
            .or(early_stop.as_ref().map(|t| t.eps))
            .unwrap_or(0.0),
        early_stop_window: window,
        ..SweepConfig::defaults(d)
    };
    sweep.validate(d).map_err(classify)?;

    let ctx = SweepContext::for_experiment(&exp).map_err(classify)?;
    let results: Vec<RegionResult> = families
        .iter()
        .map(|f| match f {
            Family::Group => sweep_group_budgets(&ctx, &sweep),
            Family::Individual => sweep_individual(&ctx, &sweep),
            Family::Randomized => sweep_randomized(&ctx, &sweep),
        })
        .collect::<Result<_, _>>()
        .map_err(classify)?;

    let out = s.out_dir();
    create_dir(&out)?;
    let mut files = Vec::new();
    let mut lines = Vec::new();

    if let Some(group) = results.iter().find(|r| r.family == Family::Group) {
        match equal_opportunity_comparison(&ctx, group, tolerance) {
            Ok(cmp) => {
                write_json(&out.join("equal_opportunity.json"), &cmp).map_err(CliError::failed)?;
                files.push("equal_opportunity.json".to_string());
                lines.push(format!(
                    "group budgets dominate {}/{} randomized equal-opportunity points",
                    cmp.report.dominated, cmp.report.total
                ));
            }
            Err(ExperimentError::NoRandomizedParity(m)) => {
                lines.push(format!("equal opportunity: {m}"))
            }
            Err(e) => return Err(classify(e)),
        }
    }

    let mut summary = None;
    if equal_odds {
        let regions: Vec<(Family, Vec<OperatingPoint>)> = results
            .iter()
            .map(|r| (r.family, r.points.clone()))
            .collect();
        let (sum, solutions) = summarize(&regions, tolerance, b_max);
        for (r, sol) in results.iter().zip(&solutions) {
            let name = format!("{}_equal_odds.csv", r.family.name());
            let pts: Vec<OperatingPoint> = sol.iter().map(|x| x.point).collect();
            write_points(&out.join(&name), &pts, r.base_rates, tolerance, b_max)
                .map_err(CliError::failed)?;
            files.push(name);
        }
        write_json(&out.join("dominance.json"), &sum).map_err(CliError::failed)?;
        files.push("dominance.json".to_string());
        summary = Some(sum);
    }

    let manifest = Manifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        dataset: s.data_path()?.display().to_string(),
        n_rows: data.n_rows(),
        n_features: d,
        seed: config.seed,
        split_seed: derive_seed(config.seed, SPLIT),
        split_fraction: config.split_fraction,
        validation_fraction: config.validation_fraction,
        group_threshold: exp.dataset.group_threshold(),
        train_base_rates: exp.train_base_rates,
        test_base_rates: group_base_rates(&exp.test)?,
        forest: exp.forest.config().clone(),
        selection: config.selection,
        sweep,
        early_stop,
        files,
    };
    let written = emit_report(&out, &results, &manifest).map_err(classify)?;
    lines.extend(written.iter().map(|p| format!("wrote {}", p.display())));

    if let Some(sum) = summary {
        lines.extend(summary_lines(&sum));
        if !infeasible_families(&sum).is_empty() {
            return Err(infeasible(&sum, &lines, &out));
        }
    }
    Ok(lines)
}

pub fn report(s: &Settings) -> Result<Vec<String>, CliError> {
    let input = s
        .input
        .clone()
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let manifest_path = input.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", manifest_path.display())))?;

    let tolerance = s.epsilon.unwrap_or(manifest.sweep.tolerance);
    let b_max = s
        .b_max
        .map_or(manifest.sweep.b_max, |c| c.resolve(manifest.n_features));
    let mut regions = Vec::new();
    for family in Family::ALL {
        let name = format!("{}.csv", family.name());
        if manifest.files.contains(&name) {
            let points = read_points(&input.join(&name)).map_err(CliError::input)?;
            regions.push((family, points));
        }
    }
    if regions.is_empty() {
        return Err(CliError::Input(format!(
            "{} lists no sweep tables",
            manifest_path.display()
        )));
    }
    let (summary, _) = summarize(&regions, tolerance, b_max);
    let out: PathBuf = s.out.clone().unwrap_or(input);
    create_dir(&out)?;
    let path = out.join("report.json");
    write_json(&path, &summary).map_err(CliError::failed)?;
    let mut lines = vec![format!("wrote {}", path.display())];
    lines.extend(summary_lines(&summary));
    if !infeasible_families(&summary).is_empty() {
        return Err(infeasible(&summary, &lines, &out));
    }
    Ok(lines)
}
