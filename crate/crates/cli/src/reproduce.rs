use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use ringcode_core::docs::Resolver;
use ringcode_core::markov::{entropy_rate, Labeling, MarkovChain};
use ringcode_core::presentation::{induced_sum_labeling, injectivity_obstruction_check};
use ringcode_core::rate::{compare_presentations, computing_rate, cover_region, single_source_rate};
use ringcode_core::typicality::sample_path;

use crate::commands::{emit, rate_table, CmdResult};
use crate::{Cli, Failure};

const DEPTH: usize = 8;
const VALUE_TOL: f64 = 5e-3;

#[derive(Debug, Serialize)]
struct Row {
    quantity: String,
    computed: String,
    expected: String,
    tolerance: String,
    pass: bool,
}

#[derive(Default, Serialize)]
struct Table {
    rows: Vec<Row>,
    notes: Vec<String>,
}

impl Table {
    fn value(&mut self, quantity: &str, computed: f64, expected: f64, tol: f64) {
        self.rows.push(Row {
            quantity: quantity.into(),
            computed: format!("{computed:.5}"),
            expected: format!("{expected:.4}"),
            tolerance: format!("{tol:.0e}"),
            pass: (computed - expected).abs() <= tol,
        });
    }

    fn check(&mut self, quantity: &str, computed: String, expected: &str, tolerance: &str, pass: bool) {
        self.rows.push(Row {
            quantity: quantity.into(),
            computed,
            expected: expected.into(),
            tolerance: tolerance.into(),
            pass,
        });
    }

    fn render(&self, example: u32) -> String {
        let mut t = String::new();
        let _ = writeln!(t, "example {example}");
        let _ = writeln!(
            t,
            "  {:<44} {:>22} {:>14} {:>10}  result",
            "quantity", "computed", "expected", "tolerance"
        );
        for r in &self.rows {
            let _ = writeln!(
                t,
                "  {:<44} {:>22} {:>14} {:>10}  {}",
                r.quantity,
                r.computed,
                r.expected,
                r.tolerance,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        for n in &self.notes {
            let _ = writeln!(t, "  note: {n}");
        }
        t
    }
}

pub fn run(cli: &Cli, docs: &Resolver, example: u32) -> CmdResult {
    let table = match example {
        1 => example_1(docs)?,
        3 => example_3(docs)?,
        4 => example_4(docs)?,
        6 => example_6(docs)?,
        other => return Err(Failure::validation(format!("no bundled example {other}; choose 1, 3, 4 or 6"))),
    };
    let all_pass = table.rows.iter().all(|r| r.pass);
    let result = json!({ "example": example, "pass": all_pass, "rows": table.rows, "notes": table.notes });
    emit(cli, "reproduce", table.render(example), result)?;
    if all_pass {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            message: format!("example {example}: at least one quantity failed"),
        })
    }
}

fn example_1(docs: &Resolver) -> Result<Table, Failure> {
    let ring = docs.load_ring("z4")?;
    let c = docs.load_chain("ex1-chain")?;
    let h = entropy_rate(&c)?;
    let rep = single_source_rate(&ring, &c, DEPTH)?;
    let mut t = Table::default();
    t.value("entropy rate H(P|pi)", h, 0.1602, VALUE_TOL);
    let mut cands: Vec<f64> = rep.terms.iter().filter_map(|x| x.scaled_complement).collect();
    cands.sort_by(|a, b| b.total_cmp(a));
    for (c, want) in cands.iter().zip([0.1602, 0.1474]) {
        t.value("scaled complement term", *c, want, VALUE_TOL);
    }
    if cands.len() != 2 {
        t.check("non-zero proper ideal terms", cands.len().to_string(), "2", "exact", false);
    }
    t.check(
        "R0 equals H over Z4",
        format!("{:.5}", rep.r0.hi),
        &format!("{h:.5}"),
        "exact",
        rep.r0.is_exact() && rep.r0.hi == h,
    );
    Ok(t)
}

fn example_3(docs: &Resolver) -> Result<Table, Failure> {
    let pr = docs.load_problem("ex3")?;
    let p = docs.load_presentation("pres-z4")?;
    let eq7 = docs.load_chain("eq7-chain")?;
    let sl = induced_sum_labeling(&pr.joint, &pr.function, &p)?;
    let mut t = Table::default();
    let lumpable = pr.joint.is_lumpable(&sl.labeling);
    t.check("sum process is lumpable", lumpable.to_string(), "true", "1e-9", lumpable);
    if lumpable {
        let lumped = pr.joint.lump(&sl.labeling)?;
        let mut worst = 0.0f64;
        for (i, si) in eq7.states().iter().enumerate() {
            for (j, sj) in eq7.states().iter().enumerate() {
                let (Some(li), Some(lj)) = (lumped.state_index(si), lumped.state_index(sj)) else {
                    return Err(Failure::validation(format!("lumped chain lacks state {si} or {sj}")));
                };
                worst = worst.max((lumped.prob(li, lj) - eq7.prob(i, j)).abs());
            }
        }
        t.check("max |lumped - reference chain|", format!("{worst:.2e}"), "0", "2e-3", worst <= 2e-3);
    }
    let h7 = entropy_rate(&eq7)?;
    t.value("entropy rate of the sum chain", h7, 0.4422, VALUE_TOL);
    let cover = cover_region(&pr.joint, DEPTH)?;
    if let Some(full) = cover.iter().find(|c| c.subset.len() == pr.function.arity()) {
        t.value("sum-rate bound for recovering all sources", full.bound.lo, 1.4236, VALUE_TOL);
    }
    let rep = computing_rate(&pr.function, &p, &pr.joint, DEPTH)?;
    let mut note = String::from("reference intermediates 0.1832 (k/n), 0.3664 (2k/n) and 0.3226 are not asserted. ");
    let _ = write!(
        note,
        "Recomputed over Z4: H of the sum process {:.5}, R0 = {:.5}; scaled terms ",
        rep.entropy_rate.lo, rep.r0.hi
    );
    let terms: Vec<String> = rep
        .terms
        .iter()
        .map(|x| format!("{{{}}}: {:.5}", x.ideal.join(","), x.scaled_term.hi))
        .collect();
    note.push_str(&terms.join(", "));
    note.push_str(". The stated symmetric region matches the sum-chain entropy rate, not 0.3664.");
    t.notes.push(note);
    t.notes.push(rate_table(&rep).trim_end().replace('\n', "\n        "));
    Ok(t)
}

fn pair_counts(labels: &[usize], k: usize) -> Vec<Vec<u64>> {
    let mut c = vec![vec![0u64; k]; k];
    for w in labels.windows(2) {
        c[w[0]][w[1]] += 1;
    }
    c
}

/// Largest `|freq - p| / se` over all entries; `order[i]` is the label of model state `i`.
fn worst_z(counts: &[Vec<u64>], model: &MarkovChain, order: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for (i, &li) in order.iter().enumerate() {
        let row: u64 = counts[li].iter().sum();
        if row == 0 {
            continue;
        }
        for (j, &lj) in order.iter().enumerate() {
            let p = model.prob(i, j);
            let f = counts[li][lj] as f64 / row as f64;
            let se = (p * (1.0 - p) / row as f64).sqrt();
            let z = if se > 0.0 {
                (f - p).abs() / se
            } else if f == p {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
    }
    worst
}

fn example_4(docs: &Resolver) -> Result<Table, Failure> {
    let g = docs.load_function("ex3-function")?;
    let (schedule, init, eq7, _) = docs.load_schedule("ex4-schedule")?;
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = sample_path(&schedule, &init, n, &mut rng)?;
    let tuples = schedule
        .states
        .iter()
        .map(|s| g.parse_tuple(s))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<usize> = x.iter().map(|&s| g.eval(&tuples[s])).collect();
    let k = g.codomain().len();
    let order = eq7
        .states()
        .iter()
        .map(|s| {
            g.codomain()
                .iter()
                .position(|c| c == s)
                .ok_or_else(|| Failure::validation(format!("state {s} is not a function value")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let z = worst_z(&pair_counts(&labels, k), &eq7, &order);
    let mut t = Table::default();
    t.check(
        "scheduled sum process vs homogeneous chain",
        format!("max z = {z:.1}"),
        "max z <= 3",
        "3 se",
        z <= 3.0,
    );

    let pr = docs.load_problem("ex3")?;
    let pi = pr.joint.invariant_distribution()?;
    let xh = sample_path(&pr.joint, &pi, n, &mut rng)?;
    let lh: Vec<usize> = xh.iter().map(|&s| g.eval(&tuples[s])).collect();
    let keys: Vec<usize> = tuples.iter().map(|tu| g.eval(tu)).collect();
    let lumped = pr.joint.lump(&Labeling::from_keys(&keys))?;
    let identity: Vec<usize> = (0..lumped.len()).collect();
    let zc = worst_z(&pair_counts(&lh, k), &lumped, &identity);
    t.notes.push(format!(
        "control: the homogeneous joint chain sampled for {n} steps gives max z = {zc:.1} against its lumped chain"
    ));
    Ok(t)
}

fn example_6(docs: &Resolver) -> Result<Table, Failure> {
    let pr = docs.load_problem("ex3")?;
    let z4 = docs.load_presentation("pres-z4")?;
    let z5 = docs.load_presentation("pres-z5")?;
    let h7 = entropy_rate(&docs.load_chain("eq7-chain")?)?;
    let rep5 = computing_rate(&pr.function, &z5, &pr.joint, DEPTH)?;
    let mut t = Table::default();
    let h5 = rep5.entropy_rate;
    t.check(
        "entropy rate of the Z5 sum process",
        format!("[{:.5}, {:.5}]", h5.lo, h5.hi),
        "0.4623",
        "5e-3",
        h5.is_exact() && (h5.lo - 0.4623).abs() <= VALUE_TOL,
    );
    let cmp = compare_presentations(&pr.function, &[z4, z5.clone()], &pr.joint, DEPTH)?;
    let t4 = cmp.outcomes[0].report.r0;
    let t5 = cmp.outcomes[1].report.r0;
    t.check(
        "Z4 threshold below Z5 threshold",
        format!("{:.5} < {:.5}", t4.hi, t5.lo),
        &format!("{h7:.4} < 0.4623"),
        "strict",
        t4.hi < t5.lo,
    );
    let injective = injectivity_obstruction_check(&z5);
    t.check(
        "h injective on Z5 reachable sums",
        injective.to_string(),
        "false",
        "exact",
        !injective,
    );
    let alt = docs.load_presentation("pres-z5-alt")?;
    let alt_rep = computing_rate(&pr.function, &alt, &pr.joint, DEPTH)?;
    t.notes.push(format!(
        "the bundled Z5 presentation x1+2x2+4x3 separates sums that the function identifies, so its sum process carries {:.5} bits; the alternative x1+3x2+4x3 (pres-z5-alt) gives [{:.5}, {:.5}]",
        h5.hi, alt_rep.entropy_rate.lo, alt_rep.entropy_rate.hi
    ));
    Ok(t)
}
