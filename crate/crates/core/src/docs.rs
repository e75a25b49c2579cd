//! JSON documents for rings, chains, functions, presentations, schedules and
//! simulation configs.
//!
//! A document may name another document instead of inlining it. Names resolve
//! against the referring file's directory, then the working directory, then
//! the workspace directory, then the built-in set. Stored probabilities may be
//! decimal strings; rows are renormalized when the chain is built, never in the
//! document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::builtin;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::markov::MarkovChain;
use crate::presentation::{FunctionSpec, Presentation};
use crate::ring::{Elem, FiniteRing};
use crate::sim::{ComputingSetup, DecoderKind, JointSource, SimParams};
use crate::typicality::ChainSchedule;

/// A named document or an inline one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DocRef<T> {
    Name(String),
    Inline(T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prob {
    Text(String),
    Number(f64),
}

impl Prob {
    pub fn value(&self) -> Result<f64> {
        let v = match self {
            Prob::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Document(format!("bad probability {s:?}")))?,
            Prob::Number(x) => *x,
        };
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Document(format!("probability {v} out of range")));
        }
        Ok(v)
    }
}

fn matrix(rows: &[Vec<Prob>]) -> Result<Mat> {
    rows.iter().map(|r| r.iter().map(Prob::value).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RingDoc {
    Modular {
        q: usize,
    },
    Triangular {
        p: usize,
    },
    Product {
        factors: Vec<DocRef<RingDoc>>,
    },
    Table {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
        add: Vec<Vec<usize>>,
        mul: Vec<Vec<usize>>,
    },
}

impl RingDoc {
    /// Full-table form of any ring.
    pub fn table_of(ring: &FiniteRing) -> RingDoc {
        RingDoc::Table {
            name: Some(ring.name().to_string()),
            labels: Some(ring.labels().to_vec()),
            add: ring.add_table().to_vec(),
            mul: ring.mul_table().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDoc {
    pub states: Vec<String>,
    pub matrix: Vec<Vec<Prob>>,
}

impl ChainDoc {
    pub fn of(chain: &MarkovChain) -> ChainDoc {
        ChainDoc {
            states: chain.states().to_vec(),
            matrix: chain
                .matrix()
                .iter()
                .map(|r| r.iter().map(|&p| Prob::Number(p)).collect())
                .collect(),
        }
    }

    pub fn build(&self) -> Result<MarkovChain> {
        MarkovChain::renormalized(self.states.clone(), matrix(&self.matrix)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDoc {
    pub alphabets: Vec<Vec<String>>,
    pub codomain: Vec<String>,
    pub table: Vec<usize>,
}

impl FunctionDoc {
    pub fn build(&self) -> Result<FunctionSpec> {
        FunctionSpec::new(self.alphabets.clone(), self.codomain.clone(), self.table.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresentationDoc {
    pub ring: DocRef<RingDoc>,
    /// `k[t][a]` is the ring element for symbol index `a` of source `t`.
    pub k: Vec<Vec<Elem>>,
    /// `h[z]` is the codomain index for ring element `z`, or null off the reachable sums.
    pub h: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDoc {
    pub function: DocRef<FunctionDoc>,
    pub joint: DocRef<ChainDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub states: Vec<String>,
    /// The step from time `t` uses `matrices[t % len]`; the first symbol is at time 0.
    pub matrices: Vec<Vec<Vec<Prob>>>,
    pub init: Vec<Prob>,
    /// Decoder model of the sum process.
    pub z_model: DocRef<ChainDoc>,
    pub z_elems: Vec<Elem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SimSourceDoc {
    Single {
        ring: DocRef<RingDoc>,
        chain: DocRef<ChainDoc>,
    },
    Computing {
        problem: DocRef<ProblemDoc>,
        presentation: DocRef<PresentationDoc>,
    },
    Scheduled {
        schedule: DocRef<ScheduleDoc>,
        function: DocRef<FunctionDoc>,
        presentation: DocRef<PresentationDoc>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfigDoc {
    pub source: SimSourceDoc,
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub decoder: DecoderKind,
}

impl SimConfigDoc {
    pub fn params(&self) -> SimParams {
        SimParams {
            n: self.n,
            k: self.k,
            trials: self.trials,
            decoder: self.decoder,
            seed: self.seed,
        }
    }
}

/// A sampled path, by state index, with the document it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDoc {
    pub source: String,
    pub path: Vec<usize>,
}

/// A loaded computing problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub function: FunctionSpec,
    pub joint: MarkovChain,
}

#[derive(Debug, Clone)]
pub enum SimJob {
    Single { ring: FiniteRing, chain: MarkovChain },
    Computing(Box<ComputingSetup>),
}

/// Serializes with a leading `"document"` tag.
pub fn to_document_string<T: Serialize>(kind: &str, doc: &T) -> Result<String> {
    let mut v = serde_json::to_value(doc)?;
    if let Value::Object(map) = &mut v {
        let mut tagged = serde_json::Map::new();
        tagged.insert("document".into(), Value::String(kind.into()));
        tagged.extend(std::mem::take(map));
        *map = tagged;
    }
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Parses a document; a `"document"` tag, if present, must equal `kind`.
pub fn parse_document<T: DeserializeOwned>(text: &str, kind: &str, origin: &str) -> Result<T> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Document(format!("{origin}: {e}")))?;
    if let Some(tag) = v.get("document") {
        if tag.as_str() != Some(kind) {
            return Err(Error::Document(format!("{origin}: expected a {kind} document, found {tag}")));
        }
    }
    serde_json::from_value(v).map_err(|e| Error::Document(format!("{origin}: {e}")))
}

/// Finds documents by name and builds library values from them.
#[derive(Debug, Clone, Default)]
pub struct Resolver {
    workspace: Option<PathBuf>,
}

impl Resolver {
    pub fn new(workspace: Option<PathBuf>) -> Resolver {
        Resolver { workspace }
    }

    /// Document text and the directory nested names resolve against.
    pub fn read(&self, name: &str, base: Option<&Path>) -> Result<(String, Option<PathBuf>)> {
        // `foo`, `foo.doc` and `foo.json` all find `foo.json`.
        let mut names = vec![name.to_string()];
        let stem = name.strip_suffix(".doc").unwrap_or(name);
        if Path::new(stem).extension().is_none() {
            names.push(format!("{stem}.json"));
        }
        let mut dirs: Vec<PathBuf> = base.map(Path::to_path_buf).into_iter().collect();
        dirs.push(PathBuf::new());
        dirs.extend(self.workspace.clone());
        let candidates = dirs.iter().flat_map(|d| names.iter().map(move |n| d.join(n)));
        for c in candidates {
            if c.is_file() {
                let text = fs::read_to_string(&c).map_err(|e| Error::Document(format!("{}: {e}", c.display())))?;
                return Ok((text, c.parent().map(Path::to_path_buf)));
            }
        }
        builtin::get(name)
            .map(|t| (t.to_string(), None))
            .ok_or_else(|| Error::Document(format!("no document named {name:?}")))
    }

    fn fetch<T: DeserializeOwned + Clone>(
        &self,
        r: &DocRef<T>,
        kind: &str,
        base: Option<&Path>,
    ) -> Result<(T, Option<PathBuf>)> {
        match r {
            DocRef::Inline(doc) => Ok((doc.clone(), base.map(Path::to_path_buf))),
            DocRef::Name(name) => {
                let (text, dir) = self.read(name, base)?;
                Ok((parse_document(&text, kind, name)?, dir))
            }
        }
    }

    pub fn ring(&self, r: &DocRef<RingDoc>, base: Option<&Path>) -> Result<FiniteRing> {
        let (doc, dir) = self.fetch(r, "ring", base)?;
        let dir = dir.as_deref();
        match doc {
            RingDoc::Modular { q } => FiniteRing::modular(q),
            RingDoc::Triangular { p } => FiniteRing::triangular(p),
            RingDoc::Product { factors } => {
                let mut it = factors.iter();
                let first = it
                    .next()
                    .ok_or_else(|| Error::Document("product ring without factors".into()))?;
                let mut acc = self.ring(first, dir)?;
                for f in it {
                    acc = FiniteRing::product(&acc, &self.ring(f, dir)?);
                }
                Ok(acc)
            }
            RingDoc::Table { name, labels, add, mul } => {
                let labels = labels.unwrap_or_else(|| (0..add.len()).map(|i| i.to_string()).collect());
                FiniteRing::from_tables(name.unwrap_or_else(|| "table".into()), labels, add, mul)
            }
        }
    }

    pub fn chain(&self, r: &DocRef<ChainDoc>, base: Option<&Path>) -> Result<MarkovChain> {
        self.fetch(r, "chain", base)?.0.build()
    }

    pub fn function(&self, r: &DocRef<FunctionDoc>, base: Option<&Path>) -> Result<FunctionSpec> {
        self.fetch(r, "function", base)?.0.build()
    }

    pub fn presentation(&self, r: &DocRef<PresentationDoc>, base: Option<&Path>) -> Result<Presentation> {
        let (doc, dir) = self.fetch(r, "presentation", base)?;
        let ring = self.ring(&doc.ring, dir.as_deref())?;
        Presentation::new(ring, doc.k, doc.h)
    }

    pub fn problem(&self, r: &DocRef<ProblemDoc>, base: Option<&Path>) -> Result<Problem> {
        let (doc, dir) = self.fetch(r, "problem", base)?;
        let dir = dir.as_deref();
        Ok(Problem {
            function: self.function(&doc.function, dir)?,
            joint: self.chain(&doc.joint, dir)?,
        })
    }

    /// Schedule, initial distribution, decoder model and its ring elements.
    pub fn schedule(
        &self,
        r: &DocRef<ScheduleDoc>,
        base: Option<&Path>,
    ) -> Result<(ChainSchedule, Vec<f64>, MarkovChain, Vec<Elem>)> {
        let (doc, dir) = self.fetch(r, "schedule", base)?;
        let matrices = doc
            .matrices
            .iter()
            .map(|m| MarkovChain::renormalized(doc.states.clone(), matrix(m)?))
            .collect::<Result<Vec<_>>>()?;
        let schedule = ChainSchedule::new(matrices)?;
        let init = doc.init.iter().map(Prob::value).collect::<Result<Vec<f64>>>()?;
        let total: f64 = init.iter().sum();
        if init.len() != doc.states.len() || !(total > 0.0) {
            return Err(Error::Document("schedule init must be a distribution over its states".into()));
        }
        let init = init.iter().map(|p| p / total).collect();
        let z_model = self.chain(&doc.z_model, dir.as_deref())?;
        Ok((schedule, init, z_model, doc.z_elems))
    }

    pub fn sim_job(&self, doc: &SimConfigDoc, base: Option<&Path>) -> Result<SimJob> {
        match &doc.source {
            SimSourceDoc::Single { ring, chain } => Ok(SimJob::Single {
                ring: self.ring(ring, base)?,
                chain: self.chain(chain, base)?,
            }),
            SimSourceDoc::Computing { problem, presentation } => {
                let pr = self.problem(problem, base)?;
                let p = self.presentation(presentation, base)?;
                Ok(SimJob::Computing(Box::new(ComputingSetup::homogeneous(pr.function, p, pr.joint)?)))
            }
            SimSourceDoc::Scheduled {
                schedule,
                function,
                presentation,
            } => {
                let (s, init, z_model, z_elems) = self.schedule(schedule, base)?;
                let g = self.function(function, base)?;
                let p = self.presentation(presentation, base)?;
                Ok(SimJob::Computing(Box::new(ComputingSetup::new(
                    g,
                    p,
                    JointSource::Schedule(s),
                    init,
                    z_model,
                    z_elems,
                )?)))
            }
        }
    }

    pub fn load_ring(&self, name: &str) -> Result<FiniteRing> {
        self.ring(&DocRef::Name(name.into()), None)
    }

    pub fn load_chain(&self, name: &str) -> Result<MarkovChain> {
        self.chain(&DocRef::Name(name.into()), None)
    }

    pub fn load_function(&self, name: &str) -> Result<FunctionSpec> {
        self.function(&DocRef::Name(name.into()), None)
    }

    pub fn load_presentation(&self, name: &str) -> Result<Presentation> {
        self.presentation(&DocRef::Name(name.into()), None)
    }

    pub fn load_problem(&self, name: &str) -> Result<Problem> {
        self.problem(&DocRef::Name(name.into()), None)
    }

    pub fn load_schedule(&self, name: &str) -> Result<(ChainSchedule, Vec<f64>, MarkovChain, Vec<Elem>)> {
        self.schedule(&DocRef::Name(name.into()), None)
    }

    /// Sim config and the directory its nested names resolve against.
    pub fn load_sim_config(&self, name: &str) -> Result<(SimConfigDoc, Option<PathBuf>)> {
        let (text, dir) = self.read(name, None)?;
        Ok((parse_document(&text, "sim-config", name)?, dir))
    }
}
