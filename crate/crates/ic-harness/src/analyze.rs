use ic_core::scheme_cr::{CRTrace, TraceError};
use ic_core::trace_lab::{
    build_matching_execution, check_lemmas, check_reduction, decompose, LabError, LemmaReport,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum AnalyzeError {
    #[error("{0}")]
    Parse(#[from] TraceError),
    #[error("{0}")]
    Lab(#[from] LabError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: u64,
    pub alice_iterations: u64,
    pub sequences: usize,
    pub good_sequences: usize,
    pub frames: usize,
    pub segments: [usize; 4],
    pub f: usize,
    pub d: usize,
    /// Edit corruptions, when the trace names its protocol.
    pub c: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub summary: TraceSummary,
    pub lemmas: Vec<LemmaReport>,
}

impl TraceReport {
    pub fn pass(&self) -> bool {
        self.lemmas.iter().all(|l| l.pass)
    }
}

pub fn analyze_trace_text(text: &str) -> Result<TraceReport, AnalyzeError> {
    let trace = CRTrace::from_jsonl(text)?;
    analyze_trace(&trace)
}

pub fn analyze_trace(trace: &CRTrace) -> Result<TraceReport, AnalyzeError> {
    let dec = decompose(trace)?;
    let mut lemmas = check_lemmas(trace, &dec);
    let mut c = None;
    let pi = trace
        .header
        .protocol
        .as_ref()
        .and_then(|p| p.indel_robust().ok());
    if let (Some(pi), None) = (pi, &trace.outcome.aborted) {
        let exec = build_matching_execution(trace, &pi, &trace.header.x, &trace.header.y)?;
        c = Some(exec.c);
        lemmas.extend(check_reduction(&exec));
    }
    let mut segments = [0; 4];
    for s in dec.segments.iter().filter(|s| !s.virtual_segment) {
        segments[(s.seg_type - 1) as usize] += 1;
    }
    Ok(TraceReport {
        summary: TraceSummary {
            iterations: trace.outcome.iterations,
            alice_iterations: trace.outcome.alice_iterations,
            sequences: dec.sequences.len(),
            good_sequences: dec.sequences.iter().filter(|s| s.good).count(),
            frames: dec.frames.len(),
            segments,
            f: trace.outcome.f,
            d: trace.outcome.d,
            c,
        },
        lemmas,
    })
}

pub fn report_lines(r: &TraceReport) -> Vec<String> {
    let s = &r.summary;
    let mut out = vec![format!(
        "iterations {} (Alice {}), sequences {} ({} good), frames {}, segments {:?}, f={} d={} c={}",
        s.iterations,
        s.alice_iterations,
        s.sequences,
        s.good_sequences,
        s.frames,
        s.segments,
        s.f,
        s.d,
        s.c.map_or("n/a".to_string(), |c| c.to_string())
    )];
    for l in &r.lemmas {
        let mut line = format!("{}: {}", l.lemma_id, if l.pass { "PASS" } else { "FAIL" });
        if !l.pass {
            line += &format!(" at {:?}", l.witness_iterations);
        }
        out.push(line);
    }
    out
}
