use std::fmt::Write as _;
use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use ringcode_core::docs::{PathDoc, Resolver, SimJob};
use ringcode_core::linalg::Mat;
use ringcode_core::markov::{
    data_processing, entropy_rate, quotient_entropy_rate_bounds, Labeling, MarkovChain, LUMP_TOLERANCE, ROW_TOLERANCE,
};
use ringcode_core::rate::{compare_presentations, computing_rate, cover_region, injection_search_rate, single_source_rate, Interval, RateRegionReport};
use ringcode_core::ring::{enumerate_left_ideals, quotient_partition, FiniteRing};
use ringcode_core::sim::{run_computing_sim, run_single_source_sim, SimParams, SimResult};
use ringcode_core::typicality::sample_path;

use crate::{ChainCmd, Cli, Command, Failure, RateCmd, RingCmd, SimulateArgs};

pub type CmdResult = Result<(), Failure>;

pub fn tolerances() -> Value {
    json!({
        "row_sum": ROW_TOLERANCE,
        "lumpability": LUMP_TOLERANCE,
        "ml_tie": 1e-9,
    })
}

/// Prints the table or the JSON document, and writes the document to `--out`.
pub fn emit(cli: &Cli, command: &str, text: String, result: Value) -> CmdResult {
    let doc = json!({
        "command": command,
        "tolerances": tolerances(),
        "result": result,
    });
    let pretty = serde_json::to_string_pretty(&doc).map_err(|e| Failure::validation(e.to_string()))? + "\n";
    if cli.json {
        print!("{pretty}");
    } else {
        print!("{text}");
    }
    if let Some(path) = &cli.out {
        fs::write(path, &pretty).map_err(|e| Failure::io(path, e))?;
    }
    Ok(())
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::validation(e.to_string()))
}

pub fn run(cli: &Cli) -> CmdResult {
    let docs = Resolver::new(cli.workspace.clone());
    match &cli.command {
        Command::Ring(c) => ring(cli, &docs, c),
        Command::Chain(c) => chain(cli, &docs, c),
        Command::Rate(c) => rate(cli, &docs, c),
        Command::Simulate(a) => simulate(cli, &docs, a),
        Command::Reproduce { example } => crate::reproduce::run(cli, &docs, *example),
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_mat(m: &Mat, indent: &str) -> String {
    m.iter().map(|r| format!("{indent}{}\n", fmt_vec(r))).collect()
}

fn fmt_interval(i: &Interval) -> String {
    if i.is_exact() {
        format!("{:.6}", i.lo)
    } else {
        format!("[{:.6}, {:.6}]", i.lo, i.hi)
    }
}

fn label_set(ring: &FiniteRing, members: &[usize]) -> String {
    let l: Vec<&str> = members.iter().map(|&e| ring.label(e)).collect();
    format!("{{{}}}", l.join(", "))
}

fn ring(cli: &Cli, docs: &Resolver, cmd: &RingCmd) -> CmdResult {
    let (name, inspect) = match cmd {
        RingCmd::Inspect { ring } => (ring, true),
        RingCmd::Ideals { ring } => (ring, false),
    };
    let r = docs.load_ring(name)?;
    let ideals = enumerate_left_ideals(&r)?;
    let mut text = String::new();
    let mut ideal_rows = Vec::new();
    if inspect {
        let ax = r.verify_axioms();
        let _ = writeln!(
            text,
            "ring {}: order {}, characteristic {}, field: {}",
            r.name(),
            r.order(),
            r.characteristic(),
            r.is_field()
        );
        let _ = writeln!(text, "elements: {}", r.labels().join(" "));
        let _ = writeln!(
            text,
            "axioms: additive group {}, commutative addition {}, associative multiplication {}, identity {}, distributive {}",
            ax.additive_group, ax.additive_commutative, ax.mul_associative, ax.mul_identity, ax.distributive
        );
    }
    let _ = writeln!(text, "{} left ideals:", ideals.len());
    for i in &ideals {
        let q = quotient_partition(&r, i);
        let cosets: Vec<String> = q.cosets().iter().map(|c| label_set(&r, c)).collect();
        let _ = writeln!(text, "  {} (order {})", label_set(&r, i.members()), i.len());
        if inspect {
            let _ = writeln!(text, "    cosets: {}", cosets.join(" "));
        }
        ideal_rows.push(json!({
            "members": i.members().iter().map(|&e| r.label(e)).collect::<Vec<_>>(),
            "order": i.len(),
            "cosets": q.cosets().iter().map(|c| c.iter().map(|&e| r.label(e)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        }));
    }
    let result = if inspect {
        json!({
            "name": r.name(),
            "order": r.order(),
            "characteristic": r.characteristic(),
            "is_field": r.is_field(),
            "labels": r.labels(),
            "axioms": to_value(&r.verify_axioms())?,
            "ideals": ideal_rows,
        })
    } else {
        json!({ "name": r.name(), "ideals": ideal_rows })
    };
    let cmd_name = if inspect { "ring inspect" } else { "ring ideals" };
    emit(cli, cmd_name, text, result)
}

fn parse_indices(s: &str, n: usize) -> Result<Vec<usize>, Failure> {
    let mut v = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&i| i < n)
                .ok_or_else(|| Failure::validation(format!("bad state index {t:?} in {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

fn chain(cli: &Cli, docs: &Resolver, cmd: &ChainCmd) -> CmdResult {
    match cmd {
        ChainCmd::Analyze {
            chain,
            subsets,
            labeling,
            depth,
        } => {
            let c = docs.load_chain(chain)?;
            analyze(cli, &c, subsets, labeling.as_deref(), *depth)
        }
        ChainCmd::Sample { chain, n, seed } => {
            let c = docs.load_chain(chain)?;
            let pi = c.invariant_distribution()?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let path = sample_path(&c, &pi, *n, &mut rng)?;
            let doc = PathDoc {
                source: chain.clone(),
                path,
            };
            let labels: Vec<&str> = doc.path.iter().map(|&i| c.states()[i].as_str()).collect();
            emit(cli, "chain sample", format!("{}\n", labels.join(" ")), to_value(&doc)?)
        }
    }
}

fn analyze(cli: &Cli, c: &MarkovChain, subsets: &[String], labeling: Option<&str>, depth: usize) -> CmdResult {
    if !c.is_irreducible() {
        return Err(ringcode_core::Error::Reducible.into());
    }
    let pi = c.invariant_distribution()?;
    let h = entropy_rate(c)?;
    let burke = c.check_burke_form();
    let mut text = String::new();
    let _ = writeln!(text, "states: {}", c.states().join(" "));
    let _ = writeln!(text, "irreducible: true");
    let _ = writeln!(text, "invariant distribution: {}", fmt_vec(&pi));
    let _ = writeln!(text, "entropy rate H(P|pi): {h:.6} bits");
    match &burke {
        Some(b) => {
            let _ = writeln!(text, "Burke form: c1 = {:.6}, residual {:.1e}", b.c1, b.residual);
        }
        None => {
            let _ = writeln!(text, "Burke form: no");
        }
    }
    let mut complements = Vec::new();
    for s in subsets {
        let a = parse_indices(s, c.len())?;
        if a.is_empty() {
            return Err(Failure::validation("empty subset"));
        }
        let sa = c.stochastic_complement(&a)?;
        let pa = c.reduced_invariant(&a)?;
        let _ = writeln!(text, "stochastic complement on {a:?}:");
        text.push_str(&fmt_mat(&sa, "  "));
        let _ = writeln!(text, "  reduced invariant: {}", fmt_vec(&pa));
        complements.push(json!({ "subset": a, "matrix": sa, "invariant": pa }));
    }
    let mut lumping = Value::Null;
    if let Some(keys) = labeling {
        let keys: Vec<String> = keys.split(',').map(|k| k.trim().to_string()).collect();
        if keys.len() != c.len() {
            return Err(Failure::validation(format!("labeling has {} keys for {} states", keys.len(), c.len())));
        }
        let g = Labeling::from_keys(&keys);
        let lumpable = c.is_lumpable(&g);
        let bounds = quotient_entropy_rate_bounds(c, &g, depth)?;
        let dp = data_processing(c, &g)?;
        let _ = writeln!(text, "labeling {}: lumpable {lumpable}", g.names().join(" "));
        let _ = writeln!(
            text,
            "  label entropy rate in [{:.6}, {:.6}] (depth {}, exact {})",
            bounds.lower, bounds.upper, bounds.depth, bounds.exact
        );
        if lumpable {
            let l = c.lump(&g)?;
            text.push_str("  lumped chain:\n");
            text.push_str(&fmt_mat(l.matrix(), "    "));
        }
        lumping = json!({
            "names": g.names(),
            "lumpable": lumpable,
            "bounds": to_value(&bounds)?,
            "data_processing": to_value(&dp)?,
        });
    }
    let result = json!({
        "states": c.states(),
        "irreducible": true,
        "invariant": pi,
        "entropy_rate": h,
        "burke": to_value(&burke)?,
        "complements": complements,
        "labeling": lumping,
    });
    emit(cli, "chain analyze", text, result)
}

pub fn rate_table(rep: &RateRegionReport) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "ring {} (order {}, field {}), H = {}",
        rep.ring,
        rep.ring_order,
        rep.is_field,
        fmt_interval(&rep.entropy_rate)
    );
    if let Some(inj) = &rep.injection {
        let _ = writeln!(t, "injection: {inj:?}");
    }
    let _ = writeln!(
        t,
        "  {:<24} {:>6} {:>12} {:>24} {:>24}",
        "ideal", "scale", "complement", "quotient", "scaled term"
    );
    for term in &rep.terms {
        let comp = term.term_complement.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            t,
            "  {:<24} {:>6.3} {:>12} {:>24} {:>24}",
            format!("{{{}}}", term.ideal.join(",")),
            term.scale,
            comp,
            fmt_interval(&term.term_quotient),
            fmt_interval(&term.scaled_term)
        );
    }
    let _ = writeln!(
        t,
        "R0 = {} bits per symbol (exact {}, depth {})",
        fmt_interval(&rep.r0),
        rep.exact,
        rep.depth
    );
    t
}

fn rate(cli: &Cli, docs: &Resolver, cmd: &RateCmd) -> CmdResult {
    match cmd {
        RateCmd::Single {
            ring,
            chain,
            search_injections,
            depth,
        } => {
            let r = docs.load_ring(ring)?;
            let c = docs.load_chain(chain)?;
            let rep = if *search_injections {
                injection_search_rate(&r, &c, depth.depth)?
            } else {
                single_source_rate(&r, &c, depth.depth)?
            };
            emit(cli, "rate single", rate_table(&rep), to_value(&rep)?)
        }
        RateCmd::Compute {
            problem,
            presentation,
            depth,
        } => {
            let pr = docs.load_problem(problem)?;
            let p = docs.load_presentation(presentation)?;
            let check = ringcode_core::presentation::verify_presentation(&pr.function, &p);
            if !check.valid {
                return Err(Failure::validation(format!(
                    "presentation does not compute the function at {:?}",
                    check.counterexample
                )));
            }
            let rep = computing_rate(&pr.function, &p, &pr.joint, depth.depth)?;
            let mut text = rate_table(&rep);
            let _ = writeln!(text, "symmetric region: R_t > {} for every source", fmt_interval(&rep.r0));
            emit(cli, "rate compute", text, to_value(&rep)?)
        }
        RateCmd::Cover { joint, depth } => {
            let c = docs.load_chain(joint)?;
            let cons = cover_region(&c, depth.depth)?;
            let mut text = String::from("  subset            sum-rate lower limit\n");
            for k in &cons {
                let names: Vec<String> = k.subset.iter().map(|t| (t + 1).to_string()).collect();
                let _ = writeln!(text, "  {:<16}  {}", format!("{{{}}}", names.join(",")), fmt_interval(&k.bound));
            }
            emit(cli, "rate cover", text, to_value(&cons)?)
        }
        RateCmd::Compare {
            problem,
            presentations,
            depth,
        } => {
            let pr = docs.load_problem(problem)?;
            let ps = presentations
                .iter()
                .map(|p| docs.load_presentation(p))
                .collect::<Result<Vec<_>, _>>()?;
            let cmp = compare_presentations(&pr.function, &ps, &pr.joint, depth.depth)?;
            let mut text = String::new();
            for (i, (o, name)) in cmp.outcomes.iter().zip(presentations).enumerate() {
                let mark = if cmp.best.contains(&i) { " (best)" } else { "" };
                let _ = writeln!(
                    text,
                    "{name}: ring {}, R0 = {}, h injective on reachable sums: {}{mark}",
                    o.ring,
                    fmt_interval(&o.report.r0),
                    o.injective_on_reachable
                );
            }
            emit(cli, "rate compare", text, to_value(&cmp)?)
        }
    }
}

fn sim_text(r: &SimResult) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "rate {:.4} bits per symbol, {} trials", r.rate, r.trials);
    let _ = writeln!(
        t,
        "error probability {:.4} +- {:.4} ({} errors)",
        r.error_prob, r.std_error, r.errors
    );
    let _ = writeln!(
        t,
        "ties {}, no typical candidate {}, several typical {}",
        r.ties, r.none_typical, r.ambiguous
    );
    let hist: Vec<String> = r.kernel_sizes.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    let _ = writeln!(t, "kernel sizes {}", hist.join(" "));
    let _ = writeln!(t, "codeword-sum identity failures {}", r.identity_failures);
    t
}

fn run_job(job: &SimJob, p: &SimParams) -> Result<SimResult, Failure> {
    Ok(match job {
        SimJob::Single { ring, chain } => run_single_source_sim(ring, chain, p)?,
        SimJob::Computing(setup) => run_computing_sim(setup, p)?,
    })
}

fn simulate(cli: &Cli, docs: &Resolver, a: &SimulateArgs) -> CmdResult {
    let (doc, dir) = docs.load_sim_config(&a.config)?;
    let job = docs.sim_job(&doc, dir.as_deref())?;
    let mut params = doc.params();
    if let Some(t) = a.trials {
        params.trials = t;
    }
    if let Some(s) = a.seed {
        params.seed = s;
    }
    if let Some(k) = a.k {
        params.k = k;
    }
    if let Some(path) = &a.sweep_csv {
        let mut csv = String::from("k,rate,trials,errors,error_prob,std_error\n");
        let mut rows = Vec::new();
        for k in 1..=params.n {
            let r = run_job(&job, &SimParams { k, ..params })?;
            let _ = writeln!(
                csv,
                "{k},{:.6},{},{},{:.6},{:.6}",
                r.rate, r.trials, r.errors, r.error_prob, r.std_error
            );
            rows.push(r);
        }
        fs::write(path, &csv).map_err(|e| Failure::io(path, e))?;
        return emit(cli, "simulate", csv, to_value(&rows)?);
    }
    let r = run_job(&job, &params)?;
    let result = json!({ "params": to_value(&params)?, "result": to_value(&r)? });
    emit(cli, "simulate", sim_text(&r), result)
}
