use super::TreeBayesNet;
use crate::error::{Error, Result};

impl TreeBayesNet {
    /// Exact posterior over the target's states given `(node, value)`
    /// evidence.
    ///
    /// A value the node never saw in training maps to its unseen state and
    /// carries no information, so that node is marginalized like an
    /// unobserved one.
    pub fn posterior<'a, I>(&self, evidence: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut observed = vec![None; self.nodes().len()];
        for (name, value) in evidence {
            let i = self
                .nodes()
                .iter()
                .position(|n| n.name == name)
                .ok_or_else(|| Error::invalid(format!("evidence on unknown node `{name}`")))?;
            if i == self.target_index() {
                return Err(Error::invalid("the target cannot be evidence"));
            }
            let node = &self.nodes()[i];
            observed[i] = match node.state_index(value) {
                Some(s) => Some(s),
                None if node.unseen => None,
                None => {
                    return Err(Error::invalid(format!(
                        "value `{value}` is not a state of `{name}`"
                    )))
                }
            };
        }
        self.posterior_indexed(&observed)
    }

    /// Posterior with evidence given as a state index per node (`None` for
    /// unobserved). The target's entry is ignored.
    pub fn posterior_indexed(&self, observed: &[Option<usize>]) -> Result<Vec<f64>> {
        let n = self.nodes().len();
        if observed.len() != n {
            return Err(Error::DimensionMismatch {
                left: observed.len(),
                right: n,
            });
        }
        let mut adjacency = vec![Vec::new(); n];
        for c in 0..n {
            if let Some(p) = self.parent_of(c) {
                adjacency[c].push(p);
                adjacency[p].push(c);
            }
        }
        let target = self.target_index();
        let mut belief = self.local_potential(target, None);
        for &v in &adjacency[target] {
            let m = self.message(v, target, observed, &adjacency)?;
            for (b, x) in belief.iter_mut().zip(m) {
                *b *= x;
            }
        }
        normalize(&mut belief)?;
        Ok(belief)
    }

    /// Evidence indicator times the root prior, over the node's states.
    fn local_potential(&self, node: usize, observed: Option<usize>) -> Vec<f64> {
        let k = self.nodes()[node].cardinality();
        let mut phi = match observed {
            Some(s) => {
                let mut v = vec![0.0; k];
                v[s] = 1.0;
                v
            }
            None => vec![1.0; k],
        };
        if self.parent_of(node).is_none() {
            for (p, prior) in phi.iter_mut().zip(&self.nodes()[node].cpt[0]) {
                *p *= prior;
            }
        }
        phi
    }

    /// Message from `from` to its neighbour `to`, as a function of `to`'s
    /// state. Messages are rescaled to sum 1 to avoid underflow.
    fn message(
        &self,
        from: usize,
        to: usize,
        observed: &[Option<usize>],
        adjacency: &[Vec<usize>],
    ) -> Result<Vec<f64>> {
        let evidence = if from == self.target_index() {
            None
        } else {
            observed[from]
        };
        let mut local = self.local_potential(from, evidence);
        for &v in &adjacency[from] {
            if v == to {
                continue;
            }
            let m = self.message(v, from, observed, adjacency)?;
            for (l, x) in local.iter_mut().zip(m) {
                *l *= x;
            }
        }
        let nodes = self.nodes();
        let mut out = vec![0.0; nodes[to].cardinality()];
        if self.parent_of(from) == Some(to) {
            // CPT of `from` is indexed [state of `to`][state of `from`].
            for (xt, o) in out.iter_mut().enumerate() {
                *o = nodes[from].cpt[xt]
                    .iter()
                    .zip(&local)
                    .map(|(p, l)| p * l)
                    .sum();
            }
        } else {
            // `to` is the child; its CPT is indexed [state of `from`][state of `to`].
            for (xf, l) in local.iter().enumerate() {
                if *l == 0.0 {
                    continue;
                }
                for (o, p) in out.iter_mut().zip(&nodes[to].cpt[xf]) {
                    *o += p * l;
                }
            }
        }
        normalize(&mut out)?;
        Ok(out)
    }
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::invalid(
            "evidence has zero probability under the model",
        ));
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    Ok(())
}
