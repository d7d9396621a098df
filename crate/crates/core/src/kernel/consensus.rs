use nalgebra::DVector;

/// Which vehicle blocks each agent keeps a copy of. Agent i (1-based) holds
/// its own block and one copy per graph neighbor, sorted by vehicle index.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusLayout {
    pub block: usize,
    pub members: Vec<Vec<usize>>,
}

impl ConsensusLayout {
    pub fn new(block: usize, neighbors: impl Fn(usize) -> Vec<usize>, n: usize) -> Self {
        let members = (1..=n)
            .map(|i| {
                let mut m = neighbors(i);
                m.push(i);
                m.sort_unstable();
                m.dedup();
                m
            })
            .collect();
        Self { block, members }
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    /// Members of agent `i` (1-based).
    pub fn members(&self, i: usize) -> &[usize] {
        &self.members[i - 1]
    }

    pub fn local_dim(&self, i: usize) -> usize {
        self.block * self.members(i).len()
    }

    /// Offset of vehicle `j`'s block inside agent `i`'s vector.
    pub fn offset(&self, i: usize, j: usize) -> Option<usize> {
        self.members(i).iter().position(|&m| m == j).map(|k| k * self.block)
    }

    /// Agents holding a copy of vehicle `j`'s block, `j` included.
    pub fn holders(&self, j: usize) -> Vec<usize> {
        (1..=self.n()).filter(|&a| self.members(a).contains(&j)).collect()
    }

    /// Augmented vectors that agree with the global vector `u` (length n·block,
    /// grouped by vehicle).
    pub fn scatter(&self, u: &DVector<f64>) -> Vec<DVector<f64>> {
        let b = self.block;
        (1..=self.n())
            .map(|i| {
                let m = self.members(i);
                DVector::from_fn(b * m.len(), |k, _| u[(m[k / b] - 1) * b + k % b])
            })
            .collect()
    }

    /// Owner blocks gathered into a global vector.
    pub fn owned(&self, copies: &[DVector<f64>]) -> DVector<f64> {
        let b = self.block;
        let mut u = DVector::zeros(self.n() * b);
        for i in 1..=self.n() {
            let off = self.offset(i, i).expect("agent owns its block");
            u.rows_mut((i - 1) * b, b).copy_from(&copies[i - 1].rows(off, b));
        }
        u
    }

    /// Largest disagreement between any copy and its owner's block.
    pub fn consensus_gap(&self, copies: &[DVector<f64>]) -> f64 {
        let own = self.owned(copies);
        let b = self.block;
        let mut gap: f64 = 0.0;
        for i in 1..=self.n() {
            for (k, &j) in self.members(i).iter().enumerate() {
                let d = copies[i - 1].rows(k * b, b) - own.rows((j - 1) * b, b);
                gap = gap.max(d.amax());
            }
        }
        gap
    }
}

/// Euclidean projection onto the consensus subspace: every copy of block j is
/// replaced by the average over all agents that hold it.
pub fn project_consensus(layout: &ConsensusLayout, copies: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let b = layout.block;
    let n = layout.n();
    let mut sum = DVector::zeros(n * b);
    let mut count = vec![0usize; n];
    for i in 1..=n {
        for (k, &j) in layout.members(i).iter().enumerate() {
            let mut dst = sum.rows_mut((j - 1) * b, b);
            dst += copies[i - 1].rows(k * b, b);
            count[j - 1] += 1;
        }
    }
    for j in 0..n {
        let c = count[j] as f64;
        sum.rows_mut(j * b, b).iter_mut().for_each(|x| *x /= c);
    }
    layout.scatter(&sum)
}
