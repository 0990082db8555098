//! Equation-chain checking for arithmetic steps.
//!
//! A chain is a sequence of links `e0 = e1 = ... = v`. The chain is valid
//! when every link evaluates to the same value. `...` links are wildcards:
//! they stand for elided work and comparison skips over them. The first
//! value-breaking transition is reported with a verbatim segment (sliced
//! from the step's raw text) and a classified reason: a calculation error
//! when a single evaluation went wrong, a copy error when the expression was
//! transcribed differently.

use crate::error::{PipelineError, Result};
use crate::expr::{diff_sites, parse_expr, reduce_once, Expr};
use crate::feedback::ErrorKind;
use crate::step::{LinkSpan, Payload, Step};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadLink {
    /// Indices into the link list bounding the offending transition.
    pub from_idx: usize,
    pub to_idx: usize,
    /// Verbatim slice of the step's raw text covering the transition.
    pub segment: String,
    pub kind: ErrorKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainVerdict {
    Valid,
    Bad(BadLink),
}

#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    pub bad: Option<BadLink>,
    /// Value of the last evaluable link (the chain's claimed result).
    pub last_value: Option<i128>,
}

/// Checks the chain payload of a calculation or final-equation step. For the
/// final equation the leading skeleton link is skipped (it has no value);
/// the caller checks it against the decomposition separately.
pub fn evaluate_chain(step: &Step) -> Result<ChainVerdict> {
    let Payload::Chain { lead, links } = &step.payload else {
        return Err(PipelineError::Kind {
            expected: "a chain step",
            got: format!("{:?}", step.kind),
        });
    };
    let links = if lead.is_none() && !links.is_empty() {
        &links[1..]
    } else {
        &links[..]
    };
    let analysis = analyze_links(&step.raw_text, links);
    Ok(match analysis.bad {
        None => ChainVerdict::Valid,
        Some(b) => ChainVerdict::Bad(b),
    })
}

/// Core chain analysis over explicit links.
pub fn analyze_links(raw: &str, links: &[LinkSpan]) -> ChainAnalysis {
    let mut exprs: Vec<Option<Expr>> = Vec::with_capacity(links.len());
    for l in links {
        if l.text == "..." {
            exprs.push(None);
        } else {
            exprs.push(parse_expr(&l.text).ok());
        }
    }

    let mut prev: Option<(usize, i128)> = None;
    let mut last_value = None;
    for (j, link) in links.iter().enumerate() {
        if link.text == "..." {
            continue;
        }
        let value = exprs[j].as_ref().and_then(Expr::eval);
        let Some(vj) = value else {
            return ChainAnalysis {
                bad: Some(BadLink {
                    from_idx: j,
                    to_idx: j,
                    segment: link.text.clone(),
                    kind: ErrorKind::Calculation,
                    reason: format!(
                        "there is a calculation error, since \"{}\" cannot be evaluated",
                        link.text
                    ),
                }),
                last_value,
            };
        };
        last_value = Some(vj);
        if let Some((i, vi)) = prev {
            if vi != vj {
                let bad = classify_transition(raw, links, &exprs, i, j);
                return ChainAnalysis {
                    bad: Some(bad),
                    last_value,
                };
            }
        }
        prev = Some((j, vj));
    }
    ChainAnalysis {
        bad: None,
        last_value,
    }
}

fn classify_transition(
    raw: &str,
    links: &[LinkSpan],
    exprs: &[Option<Expr>],
    i: usize,
    j: usize,
) -> BadLink {
    let segment = raw[links[i].start..links[j].end].to_string();
    let l = exprs[i].as_ref().expect("left link evaluated");
    let r = exprs[j].as_ref().expect("right link evaluated");

    // A wrong bare result: the whole left expression just isn't that number.
    if r.is_num() {
        return BadLink {
            from_idx: i,
            to_idx: j,
            segment,
            kind: ErrorKind::Calculation,
            reason: format!(
                "there is a calculation error, since {} is not equal to {}",
                links[i].text, links[j].text
            ),
        };
    }

    let reduced = reduce_once(l);

    // One reduction performed, but its value came out wrong.
    if let Some(red) = &reduced {
        let diffs = diff_sites(&red.expr, r);
        if diffs.len() == 1
            && diffs[0].0 == Expr::Num(red.value)
            && diffs[0].1.is_num()
        {
            return BadLink {
                from_idx: i,
                to_idx: j,
                segment,
                kind: ErrorKind::Calculation,
                reason: format!(
                    "there is a calculation error, since {} should be {}",
                    red.site, red.value
                ),
            };
        }
    }

    // No reduction, but the expression changed in one place: a bad copy.
    let diffs = diff_sites(l, r);
    if diffs.len() == 1 {
        return BadLink {
            from_idx: i,
            to_idx: j,
            segment,
            kind: ErrorKind::Copy,
            reason: format!(
                "there is a copy error, since {} should be {}",
                diffs[0].1.render(),
                diffs[0].0.render()
            ),
        };
    }

    // One reduction plus a transcription slip elsewhere.
    if let Some(red) = &reduced {
        let diffs = diff_sites(&red.expr, r);
        if diffs.len() == 1 {
            return BadLink {
                from_idx: i,
                to_idx: j,
                segment,
                kind: ErrorKind::Copy,
                reason: format!(
                    "there is a copy error, since {} should be {}",
                    diffs[0].1.render(),
                    diffs[0].0.render()
                ),
            };
        }
    }

    let expected = reduced
        .map(|r| r.expr.render())
        .unwrap_or_else(|| links[i].text.clone());
    BadLink {
        from_idx: i,
        to_idx: j,
        segment,
        kind: ErrorKind::Copy,
        reason: format!(
            "there is a copy error, since {} should be {}",
            links[j].text, expected
        ),
    }
}
