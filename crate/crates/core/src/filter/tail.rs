use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::edit::{align, EditOp};

/// Reported token spans of a pair after tail removal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailTrim {
    pub source: Range<usize>,
    pub target: Range<usize>,
    pub trimmed: bool,
}

/// Trims unaligned trailing tokens from either side when the tail after the
/// last exact match is longer than `max_tail` of that side's length.
pub fn tail_removal(src: &[String], tgt: &[String], max_tail: f64) -> TailTrim {
    let mut out = TailTrim {
        source: 0..src.len(),
        target: 0..tgt.len(),
        trimmed: false,
    };
    let al = align(src, tgt);
    let last = al.ops.iter().rev().find_map(|op| match *op {
        EditOp::Match { hyp, refr } => Some((hyp, refr)),
        _ => None,
    });
    let Some((last_src, last_tgt)) = last else {
        return out;
    };
    let src_tail = src.len() - last_src - 1;
    if src_tail as f64 > max_tail * src.len() as f64 {
        out.source.end = last_src + 1;
        out.trimmed = true;
    }
    let tgt_tail = tgt.len() - last_tgt - 1;
    if tgt_tail as f64 > max_tail * tgt.len() as f64 {
        out.target.end = last_tgt + 1;
        out.trimmed = true;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn identical_pairs_unchanged() {
        let s = toks("a b c d");
        let t = tail_removal(&s, &s, 0.3);
        assert!(!t.trimmed);
        assert_eq!((t.source, t.target), (0..4, 0..4));
    }

    #[test]
    fn long_target_tail_trimmed() {
        let src = toks("a b c d e f");
        let tgt = toks("a b c d e f x y z");
        // tail of 3 > 0.3 * 9
        let t = tail_removal(&src, &tgt, 0.3);
        assert!(t.trimmed);
        assert_eq!(t.target, 0..6);
        assert_eq!(t.source, 0..6);
        // tail of 3 <= 0.4 * 9
        assert!(!tail_removal(&src, &tgt, 0.4).trimmed);
    }

    #[test]
    fn source_side_tail() {
        let t = tail_removal(&toks("a b c d e f g"), &toks("a b c"), 0.3);
        assert_eq!(t.source, 0..3);
    }

    #[test]
    fn full_threshold_never_trims() {
        let t = tail_removal(&toks("a"), &toks("a q r s t u v w"), 1.0);
        assert!(!t.trimmed);
        assert!(!tail_removal(&toks("x"), &toks("y z"), 0.0).trimmed);
    }
}
