//! Approximate minimum degree ordering.
//!
//! Works on the quotient graph: eliminating a variable turns it into an
//! element whose member list is the variable's neighborhood, and the
//! elements it was adjacent to are absorbed into the new one. External
//! degrees are tracked by the usual upper bound: the exact size of the
//! fresh pivot neighborhood plus set-difference counts |Vₑ \ Lp| that
//! one sweep over the pivot's neighborhood provides for every incident
//! element. Ties break by list order, so the result is deterministic
//! for a given pattern.

/// Returns an elimination order for the symmetric pattern given in
/// compressed sparse row form: `perm[k]` is the original index of the
/// variable eliminated k-th. Diagonal entries are ignored.
pub fn amd_order(n: usize, row_ptr: &[usize], col_idx: &[u32]) -> Vec<u32> {
    assert!(n < i32::MAX as usize, "matrix too large for AMD workspace");
    if n == 0 {
        return Vec::new();
    }

    const LIVE_VAR: u8 = 0;
    const ELEMENT: u8 = 1;
    const DEAD: u8 = 2;

    // Adjacency arena: each node owns a segment of `iw`, elements of
    // the list first (`elen` of them), adjacent variables after.
    let mut iw: Vec<u32> = Vec::with_capacity(row_ptr[n] + 4 * n + 16);
    let mut pe = vec![0usize; n];
    let mut len = vec![0u32; n];
    let mut elen = vec![0u32; n];
    for i in 0..n {
        pe[i] = iw.len();
        for k in row_ptr[i]..row_ptr[i + 1] {
            if col_idx[k] as usize != i {
                iw.push(col_idx[k]);
            }
        }
        len[i] = (iw.len() - pe[i]) as u32;
    }

    let mut status = vec![LIVE_VAR; n];
    let mut degree: Vec<u32> = len.clone();

    // Degree buckets as doubly linked lists.
    let mut head = vec![-1i32; n];
    let mut next = vec![-1i32; n];
    let mut prev = vec![-1i32; n];
    let insert = |head: &mut [i32], next: &mut [i32], prev: &mut [i32], d: usize, v: usize| {
        next[v] = head[d];
        prev[v] = -1;
        if head[d] >= 0 {
            prev[head[d] as usize] = v as i32;
        }
        head[d] = v as i32;
    };
    let remove = |head: &mut [i32], next: &mut [i32], prev: &mut [i32], d: usize, v: usize| {
        if prev[v] >= 0 {
            next[prev[v] as usize] = next[v];
        } else {
            head[d] = next[v];
        }
        if next[v] >= 0 {
            prev[next[v] as usize] = prev[v];
        }
    };
    for v in 0..n {
        insert(&mut head, &mut next, &mut prev, degree[v] as usize, v);
    }

    // Epoch-stamped scratch: `mark` flags membership of the current
    // pivot neighborhood, `wval` holds |Vₑ \ Lp| per element.
    let mut mark = vec![0u32; n];
    let mut wval = vec![0u32; n];
    let mut wstamp = vec![0u32; n];
    let mut epoch = 0u32;

    let mut perm = Vec::with_capacity(n);
    let mut lp: Vec<u32> = Vec::new();
    let mut tmp_e: Vec<u32> = Vec::new();
    let mut tmp_v: Vec<u32> = Vec::new();
    let mut mindeg = 0usize;

    // Compacts live segments into a fresh arena.
    let collect_garbage =
        |iw: &mut Vec<u32>, pe: &mut [usize], len: &[u32], status: &[u8], extra: usize| {
            let live: usize = (0..pe.len())
                .filter(|&i| status[i] != DEAD)
                .map(|i| len[i] as usize)
                .sum();
            let mut fresh = Vec::with_capacity((live + extra) * 2 + 16);
            for i in 0..pe.len() {
                if status[i] == DEAD {
                    continue;
                }
                let s = pe[i];
                pe[i] = fresh.len();
                fresh.extend_from_slice(&iw[s..s + len[i] as usize]);
            }
            *iw = fresh;
        };

    for k in 0..n {
        while head[mindeg] < 0 {
            mindeg += 1;
        }
        let p = head[mindeg] as usize;
        remove(&mut head, &mut next, &mut prev, mindeg, p);
        perm.push(p as u32);
        status[p] = ELEMENT;

        // Gather the pivot neighborhood Lp: directly adjacent live
        // variables plus the members of every incident element, which
        // the new element absorbs.
        epoch += 1;
        let lp_stamp = epoch;
        lp.clear();
        let (s, el, l) = (pe[p], elen[p] as usize, len[p] as usize);
        for idx in s + el..s + l {
            let v = iw[idx] as usize;
            if status[v] == LIVE_VAR && mark[v] != lp_stamp {
                mark[v] = lp_stamp;
                lp.push(v as u32);
            }
        }
        for idx in s..s + el {
            let e = iw[idx] as usize;
            if status[e] == ELEMENT {
                for j in pe[e]..pe[e] + len[e] as usize {
                    let v = iw[j] as usize;
                    if status[v] == LIVE_VAR && mark[v] != lp_stamp {
                        mark[v] = lp_stamp;
                        lp.push(v as u32);
                    }
                }
                status[e] = DEAD;
            }
        }

        // The pivot's member list replaces its old adjacency.
        if iw.len() + lp.len() > iw.capacity() {
            collect_garbage(&mut iw, &mut pe, &len, &status, lp.len());
        }
        pe[p] = iw.len();
        iw.extend_from_slice(&lp);
        len[p] = lp.len() as u32;
        elen[p] = 0;
        if lp.is_empty() {
            status[p] = DEAD;
            continue;
        }

        // One sweep computes |Vₑ \ Lp| for every element incident to
        // the neighborhood.
        epoch += 1;
        let wmark = epoch;
        for &vu in &lp {
            let v = vu as usize;
            for idx in pe[v]..pe[v] + elen[v] as usize {
                let e = iw[idx] as usize;
                if status[e] == ELEMENT {
                    if wstamp[e] != wmark {
                        wstamp[e] = wmark;
                        wval[e] = len[e];
                    }
                    wval[e] -= 1;
                }
            }
        }

        // Rebuild each neighbor's adjacency and refresh its degree.
        for &vu in &lp {
            let v = vu as usize;
            let (s, el, l) = (pe[v], elen[v] as usize, len[v] as usize);
            tmp_e.clear();
            tmp_v.clear();
            let mut deg_elems: u64 = 0;
            for idx in s..s + el {
                let e = iw[idx] as usize;
                if status[e] == ELEMENT {
                    let diff = if wstamp[e] == wmark { wval[e] } else { len[e] };
                    if diff == 0 {
                        // Every member is covered by the new element.
                        status[e] = DEAD;
                    } else {
                        tmp_e.push(e as u32);
                        deg_elems += diff as u64;
                    }
                }
            }
            for idx in s + el..s + l {
                let w = iw[idx] as usize;
                // Neighbors inside Lp are covered by the pivot element.
                if status[w] == LIVE_VAR && mark[w] != lp_stamp {
                    tmp_v.push(w as u32);
                }
            }

            let new_len = tmp_e.len() + 1 + tmp_v.len();
            if new_len <= l {
                let mut at = s;
                for &e in &tmp_e {
                    iw[at] = e;
                    at += 1;
                }
                iw[at] = p as u32;
                at += 1;
                for &w in &tmp_v {
                    iw[at] = w;
                    at += 1;
                }
            } else {
                if iw.len() + new_len > iw.capacity() {
                    collect_garbage(&mut iw, &mut pe, &len, &status, new_len);
                }
                pe[v] = iw.len();
                iw.extend_from_slice(&tmp_e);
                iw.push(p as u32);
                iw.extend_from_slice(&tmp_v);
            }
            elen[v] = tmp_e.len() as u32 + 1;
            len[v] = new_len as u32;

            let ext = lp.len() as u64 - 1;
            let d_new = (tmp_v.len() as u64 + ext + deg_elems)
                .min(degree[v] as u64 + ext)
                .min((n - k - 1) as u64) as usize;
            remove(&mut head, &mut next, &mut prev, degree[v] as usize, v);
            degree[v] = d_new as u32;
            insert(&mut head, &mut next, &mut prev, d_new, v);
            mindeg = mindeg.min(d_new);
        }
    }

    perm
}
