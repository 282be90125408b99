use std::ops::Range;

/// A named contiguous slice of a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub name: String,
    pub range: Range<usize>,
}

/// Flat trainable-parameter vector with named segments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    values: Vec<f64>,
    segments: Vec<Segment>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_segment(&mut self, name: impl Into<String>, values: impl IntoIterator<Item = f64>) -> Range<usize> {
        let start = self.values.len();
        self.values.extend(values);
        let range = start..self.values.len();
        self.segments.push(Segment { name: name.into(), range: range.clone() });
        range
    }

    /// Appends every segment of `other`, prefixing its names.
    pub fn append(&mut self, prefix: &str, other: ParamStore) {
        let offset = self.values.len();
        self.values.extend(other.values);
        self.segments.extend(other.segments.into_iter().map(|s| Segment {
            name: format!("{prefix}.{}", s.name),
            range: s.range.start + offset..s.range.end + offset,
        }));
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.segments.iter().find(|s| s.name == name).map(|s| &self.values[s.range.clone()])
    }

    /// Total length covered by segments whose name starts with `prefix`.
    pub fn prefix_len(&self, prefix: &str) -> usize {
        self.segments.iter().filter(|s| s.name.starts_with(prefix)).map(|s| s.range.len()).sum()
    }
}
