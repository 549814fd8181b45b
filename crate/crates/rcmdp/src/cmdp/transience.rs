//! Transience check via end-component detection.
//!
//! A model is transient when every stationary policy started from the initial
//! distribution reaches the absorbing set with probability one. That holds
//! exactly when the sub-MDP on non-absorbing states reachable from the
//! support of `beta` contains no end component: a bottom strongly connected
//! set of the chain induced by any policy is an end component, and
//! conversely a policy that walks into an end component and plays its
//! internal actions never gets absorbed.

use super::{CmdpModel, StateId};

/// Returns true when no policy can avoid absorption from the initial
/// distribution.
pub fn check_transience(model: &CmdpModel) -> bool {
    let n = model.num_states();

    // Forward reachability from supp(beta) under arbitrary action choice.
    let mut reachable = vec![false; n];
    let mut stack: Vec<usize> = (0..n)
        .filter(|&x| model.beta()[x] > 0.0 && !model.is_absorbing(StateId(x)))
        .collect();
    for &x in &stack {
        reachable[x] = true;
    }
    while let Some(x) = stack.pop() {
        for act in model.actions(StateId(x)) {
            for &(StateId(y), p) in &act.transitions {
                if p > 0.0 && !reachable[y] && !model.is_absorbing(StateId(y)) {
                    reachable[y] = true;
                    stack.push(y);
                }
            }
        }
    }

    let seed: Vec<usize> = (0..n).filter(|&x| reachable[x]).collect();
    if seed.is_empty() {
        return true;
    }
    !contains_end_component(model, seed)
}

/// True when `candidate` (a set of non-absorbing states) contains an end
/// component. Standard refinement: trim states with no action staying inside
/// the set, split what remains into strongly connected components, recurse.
fn contains_end_component(model: &CmdpModel, candidate: Vec<usize>) -> bool {
    let mut work = vec![candidate];
    while let Some(mut set) = work.pop() {
        loop {
            let members: std::collections::HashSet<usize> = set.iter().copied().collect();
            let kept: Vec<usize> = set
                .iter()
                .copied()
                .filter(|&x| {
                    model.actions(StateId(x)).iter().any(|act| {
                        let mut any = false;
                        for &(StateId(y), p) in &act.transitions {
                            if p > 0.0 {
                                if !members.contains(&y) {
                                    return false;
                                }
                                any = true;
                            }
                        }
                        any
                    })
                })
                .collect();
            if kept.len() == set.len() {
                break;
            }
            set = kept;
        }
        if set.is_empty() {
            continue;
        }

        let members: std::collections::HashSet<usize> = set.iter().copied().collect();
        let staying_succ = |x: usize| -> Vec<usize> {
            let mut out = Vec::new();
            for act in model.actions(StateId(x)) {
                let inside = act
                    .transitions
                    .iter()
                    .all(|&(StateId(y), p)| p <= 0.0 || members.contains(&y));
                let any = act.transitions.iter().any(|&(_, p)| p > 0.0);
                if inside && any {
                    for &(StateId(y), p) in &act.transitions {
                        if p > 0.0 {
                            out.push(y);
                        }
                    }
                }
            }
            out
        };

        let comps = strongly_connected(&set, &staying_succ);
        if comps.len() == 1 && comps[0].len() == set.len() {
            // Post-trim, every member keeps an internal action, so a single
            // covering SCC is an end component (singletons kept only via
            // self-loops).
            return true;
        }
        for comp in comps {
            work.push(comp);
        }
    }
    false
}

/// Tarjan's algorithm, iterative, restricted to `set`.
fn strongly_connected(set: &[usize], succ: &dyn Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    let members: std::collections::HashMap<usize, usize> =
        set.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let k = set.len();
    let mut index = vec![usize::MAX; k];
    let mut lowlink = vec![0usize; k];
    let mut on_stack = vec![false; k];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut comps = Vec::new();

    // Explicit DFS frames: (node, iterator position over successors).
    for start in 0..k {
        if index[start] != usize::MAX {
            continue;
        }
        let mut frames: Vec<(usize, Vec<usize>, usize)> = Vec::new();
        let local_succ = |i: usize| -> Vec<usize> {
            succ(set[i])
                .into_iter()
                .filter_map(|y| members.get(&y).copied())
                .collect()
        };
        index[start] = next_index;
        lowlink[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;
        frames.push((start, local_succ(start), 0));

        while let Some(&mut (v, ref succs, ref mut pos)) = frames.last_mut() {
            if *pos < succs.len() {
                let w = succs[*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, local_succ(w), 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&mut (parent, _, _)) = frames.last_mut() {
                    lowlink[parent] = lowlink[parent].min(lowlink[v]);
                }
                if lowlink[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(set[w]);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}
