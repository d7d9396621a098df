use nalgebra::DVector;

use crate::kernel::ConsensusLayout;

/// Synchronous message layer. Every transfer between two agents goes through
/// [`Network::send`], which counts transfers over non-edges.
#[derive(Clone, Debug)]
pub struct Network {
    neighbors: Vec<Vec<usize>>,
    pub messages: usize,
    pub locality_violations: usize,
}

impl Network {
    pub fn new(layout: &ConsensusLayout) -> Self {
        let neighbors = (1..=layout.n())
            .map(|i| layout.members(i).iter().copied().filter(|&j| j != i).collect())
            .collect();
        Self { neighbors, messages: 0, locality_violations: 0 }
    }

    /// Records a message from agent `from` to agent `to` and returns whether
    /// the link exists.
    pub fn send(&mut self, from: usize, to: usize) -> bool {
        self.messages += 1;
        let ok = self.neighbors[from - 1].contains(&to);
        if !ok {
            self.locality_violations += 1;
        }
        ok
    }

    /// Consensus projection by message passing: copy holders send their copy
    /// of block j to its owner, the owner averages and sends the mean back.
    pub fn project(&mut self, layout: &ConsensusLayout, copies: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let b = layout.block;
        let n = layout.n();
        let mut inbox: Vec<Vec<DVector<f64>>> = vec![Vec::new(); n];
        for a in 1..=n {
            for (k, &j) in layout.members(a).iter().enumerate() {
                if j != a {
                    self.send(a, j);
                }
                inbox[j - 1].push(copies[a - 1].rows(k * b, b).into_owned());
            }
        }
        let means: Vec<DVector<f64>> = inbox
            .iter()
            .map(|msgs| msgs.iter().fold(DVector::zeros(b), |acc, m| acc + m) / msgs.len() as f64)
            .collect();
        (1..=n)
            .map(|a| {
                let m = layout.members(a);
                let mut out = DVector::zeros(b * m.len());
                for (k, &j) in m.iter().enumerate() {
                    if j != a {
                        self.send(j, a);
                    }
                    out.rows_mut(k * b, b).copy_from(&means[j - 1]);
                }
                out
            })
            .collect()
    }
}
