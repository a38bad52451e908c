use crate::error::{Error, Result};

/// A contiguous `[start, end)` window over a token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn slice<'a, T>(&self, tokens: &'a [T]) -> &'a [T] {
        &tokens[self.start..self.end]
    }
}

/// Windows of at most `max_len` tokens with stride `max_len − overlap`,
/// the last one ending at the document end. A document no longer than
/// `max_len` (including an empty one) yields one segment.
pub fn segment_document(len: usize, max_len: usize, overlap: usize) -> Result<Vec<Segment>> {
    if max_len == 0 || overlap >= max_len {
        return Err(Error::Config(format!(
            "segment overlap {overlap} must be below max_len {max_len}"
        )));
    }
    let stride = max_len - overlap;
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + max_len).min(len);
        out.push(Segment { start, end });
        if end >= len {
            break;
        }
        start += stride;
    }
    Ok(out)
}

/// Index of the segment holding the most occurrences of `needles`
/// (first segment on ties).
pub fn anchor_segment(tokens: &[usize], segments: &[Segment], needles: &[usize]) -> usize {
    let mut best = (0, 0);
    for (i, seg) in segments.iter().enumerate() {
        let hits = seg.slice(tokens).iter().filter(|t| needles.contains(t)).count();
        if hits > best.1 {
            best = (i, hits);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(v: &[Segment]) -> Vec<(usize, usize)> {
        v.iter().map(|s| (s.start, s.end)).collect()
    }

    #[test]
    fn stride_arithmetic() {
        let s = segment_document(250, 100, 20).unwrap();
        assert_eq!(spans(&s), [(0, 100), (80, 180), (160, 250)]);
    }

    #[test]
    fn short_document_single_segment() {
        assert_eq!(spans(&segment_document(40, 100, 20).unwrap()), [(0, 40)]);
        assert_eq!(spans(&segment_document(100, 100, 20).unwrap()), [(0, 100)]);
    }

    #[test]
    fn zero_overlap_partitions() {
        let s = segment_document(25, 10, 0).unwrap();
        assert_eq!(spans(&s), [(0, 10), (10, 20), (20, 25)]);
    }

    #[test]
    fn overlap_too_large() {
        assert!(matches!(segment_document(10, 5, 5), Err(Error::Config(_))));
    }

    #[test]
    fn anchor_prefers_most_hits() {
        let tokens = [1, 2, 3, 9, 9, 4, 9, 5];
        let segs = segment_document(tokens.len(), 4, 0).unwrap();
        assert_eq!(anchor_segment(&tokens, &segs, &[9]), 1);
        assert_eq!(anchor_segment(&tokens, &segs, &[7]), 0);
    }
}
