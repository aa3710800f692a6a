//! Enumerative search over the program list: rank every candidate under a
//! single target metric and take the head. The pool is small by construction
//! (at most ten trials), so exhaustive ordering is the whole algorithm.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ppa::{label_index, PpaReport, ProgramList};

/// What to optimize. `Direct` carries an externally supplied ordering —
/// typically parsed from a model's answer to a rank prompt — so the search
/// itself stays pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SearchTarget {
    Power,
    Area,
    Performance,
    Direct { order: Vec<String> },
}

impl SearchTarget {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SearchTarget::Power => "power",
            SearchTarget::Area => "area",
            SearchTarget::Performance => "performance",
            SearchTarget::Direct { .. } => "direct",
        }
    }
}

/// A full ordering of the program list under one target; for the metric
/// targets the metric is non-decreasing along the order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub ordered: Vec<(String, PpaReport)>,
    pub target: SearchTarget,
}

impl Ranking {
    pub fn ids(&self) -> Vec<&str> {
        self.ordered.iter().map(|(id, _)| id.as_str()).collect()
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("program list is empty")]
    EmptyProgramList,
    #[error("invalid direct order: {0}")]
    InvalidDirectOrder(String),
}

fn tie_break(id: &str) -> (u64, String) {
    (label_index(id).unwrap_or(u64::MAX), id.to_string())
}

/// Ranks the program list under `target`: power and area ascending by that
/// metric, performance ascending by latency, direct by the supplied order.
/// Ties break by ascending candidate label index.
pub fn rank(list: &ProgramList, target: &SearchTarget) -> Result<Ranking, SearchError> {
    if list.is_empty() {
        return Err(SearchError::EmptyProgramList);
    }
    let mut entries: Vec<(String, PpaReport)> = list
        .entries()
        .iter()
        .map(|(c, r)| (c.id.clone(), r.clone()))
        .collect();

    match target {
        SearchTarget::Power => {
            entries.sort_by(|a, b| {
                a.1.power_mw
                    .total_cmp(&b.1.power_mw)
                    .then_with(|| tie_break(&a.0).cmp(&tie_break(&b.0)))
            });
        }
        SearchTarget::Area => {
            entries.sort_by(|a, b| {
                a.1.area_um2
                    .total_cmp(&b.1.area_um2)
                    .then_with(|| tie_break(&a.0).cmp(&tie_break(&b.0)))
            });
        }
        SearchTarget::Performance => {
            entries.sort_by(|a, b| {
                a.1.latency_cycles
                    .cmp(&b.1.latency_cycles)
                    .then_with(|| tie_break(&a.0).cmp(&tie_break(&b.0)))
            });
        }
        SearchTarget::Direct { order } => {
            if order.len() != entries.len() {
                return Err(SearchError::InvalidDirectOrder(format!(
                    "order lists {} ids, program list has {}",
                    order.len(),
                    entries.len()
                )));
            }
            let mut reordered = Vec::with_capacity(entries.len());
            for id in order {
                let pos = entries
                    .iter()
                    .position(|(eid, _)| eid == id)
                    .ok_or_else(|| {
                        SearchError::InvalidDirectOrder(format!(
                            "id `{id}` is not in the program list (or repeats)"
                        ))
                    })?;
                reordered.push(entries.remove(pos));
            }
            entries = reordered;
        }
    }

    Ok(Ranking {
        ordered: entries,
        target: target.clone(),
    })
}

/// The head of [`rank`]: the single best candidate under `target`.
pub fn select_best(
    list: &ProgramList,
    target: &SearchTarget,
) -> Result<(String, PpaReport), SearchError> {
    let ranking = rank(list, target)?;
    Ok(ranking
        .ordered
        .into_iter()
        .next()
        .expect("non-empty ranking"))
}

/// The side-by-side ranking table across all targets, one column per target.
/// The direct column appears only when an external order is supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub power: Vec<String>,
    pub area: Vec<String>,
    pub performance: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct: Option<Vec<String>>,
}

pub fn ranking_table(
    list: &ProgramList,
    direct_order: Option<&[String]>,
) -> Result<RankingTable, SearchError> {
    let ids = |target: &SearchTarget| -> Result<Vec<String>, SearchError> {
        Ok(rank(list, target)?
            .ordered
            .into_iter()
            .map(|(id, _)| id)
            .collect())
    };
    let direct = match direct_order {
        Some(order) => Some(ids(&SearchTarget::Direct {
            order: order.to_vec(),
        })?),
        None => None,
    };
    Ok(RankingTable {
        power: ids(&SearchTarget::Power)?,
        area: ids(&SearchTarget::Area)?,
        performance: ids(&SearchTarget::Performance)?,
        direct,
    })
}

impl RankingTable {
    /// Aligned-column text rendering of the table.
    pub fn to_text(&self) -> String {
        let mut headers = vec!["Select by Power", "Select by Area", "Select by Performance"];
        let mut columns = vec![&self.power, &self.area, &self.performance];
        if let Some(direct) = &self.direct {
            headers.push("Direct Select");
            columns.push(direct);
        }
        let widths: Vec<usize> = headers
            .iter()
            .zip(&columns)
            .map(|(h, col)| {
                col.iter()
                    .map(String::len)
                    .chain(std::iter::once(h.len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let rows = columns.iter().map(|c| c.len()).max().unwrap_or(0);
        let mut out = String::new();
        let header_line: Vec<String> = headers
            .iter()
            .zip(&widths)
            .map(|(h, w)| format!("{h:<w$}"))
            .collect();
        out.push_str(&header_line.join("  "));
        out.push('\n');
        for row in 0..rows {
            let cells: Vec<String> = columns
                .iter()
                .zip(&widths)
                .map(|(col, w)| {
                    let cell = col.get(row).map(String::as_str).unwrap_or("");
                    format!("{cell:<w$}")
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}
