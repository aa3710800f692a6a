//! Programmability measurement: line counting with cloc-compatible
//! classification, the quality score, and the changed-line count used to
//! accumulate correction effort.

use serde::{Deserialize, Serialize};

/// Line classification totals for one source text. `total` always equals
/// `blank + comment + code`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocCount {
    pub total: u64,
    pub blank: u64,
    pub comment: u64,
    pub code: u64,
}

/// Counts physical lines of `source` into blank, comment, and code.
///
/// Blank lines are whitespace-only (even inside block comments). A line is a
/// comment when its non-whitespace content is entirely `//…` or lies inside
/// `/* … */`; trailing comments do not demote code lines, matching cloc.
pub fn count_loc(source: &str) -> LocCount {
    let mut count = LocCount {
        total: 0,
        blank: 0,
        comment: 0,
        code: 0,
    };
    let mut in_block = false;
    for line in source.lines() {
        count.total += 1;
        if line.trim().is_empty() {
            count.blank += 1;
            continue;
        }
        if line_has_code(line, &mut in_block) {
            count.code += 1;
        } else {
            count.comment += 1;
        }
    }
    count
}

/// Scans one line, updating block-comment state; true when any non-comment,
/// non-whitespace character appears.
fn line_has_code(line: &str, in_block: &mut bool) -> bool {
    let bytes = line.as_bytes();
    let mut has_code = false;
    let mut i = 0;
    while i < bytes.len() {
        if *in_block {
            match line[i..].find("*/") {
                Some(rel) => {
                    *in_block = false;
                    i += rel + 2;
                }
                None => break,
            }
        } else if bytes[i].is_ascii_whitespace() {
            i += 1;
        } else if line[i..].starts_with("//") {
            break;
        } else if line[i..].starts_with("/*") {
            *in_block = true;
            i += 2;
        } else {
            has_code = true;
            i += 1;
        }
    }
    has_code
}

/// The programmability score: generated lines plus corrected lines minus the
/// number of prompt queries. Exact and unclamped — negative results are
/// legitimate.
pub fn quality(raw: u64, correct: u64, prompt: u64) -> i64 {
    raw as i64 + correct as i64 - prompt as i64
}

/// Number of changed lines between two texts: the larger of lines added and
/// lines removed under an LCS diff, so an in-place edit of k lines counts as
/// k, as does a pure insertion or deletion of k lines.
pub fn changed_lines(old: &str, new: &str) -> u64 {
    let old_lines: Vec<&str> = old.lines().collect();
    let new_lines: Vec<&str> = new.lines().collect();
    let common = lcs_len(&old_lines, &new_lines);
    let removed = old_lines.len() - common;
    let added = new_lines.len() - common;
    removed.max(added) as u64
}

fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for line_a in a {
        for (j, line_b) in b.iter().enumerate() {
            cur[j + 1] = if line_a == line_b {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
