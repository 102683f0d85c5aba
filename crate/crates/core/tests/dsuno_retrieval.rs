//! Retrieval integration tests: self-retrieval from a dictionary of distinct
//! phantom slices, and agreement between the selection and a manual scan
//! over the legal neighborhood centers.

mod common;

use ksadapt_core::dsuno::{build_dictionary, lowfreq_frame, nrmsd, select_mask, DictionarySlice};
use ksadapt_core::masks::make_vdrs;
use ksadapt_core::operators::forward_apply;
use ksadapt_core::phantom::{gen_cine_phantom, gen_sensitivities, PhantomSpec};
use ksadapt_core::{MultiCoilKSpace, SamplingMask};

/// A family of visually distinct phantom slices: ventricle position, axes,
/// and structure intensities vary smoothly with the member index.
fn family_spec(nx: usize, ny: usize, nt: usize, nc: usize, member: usize) -> PhantomSpec {
    let mut spec = PhantomSpec::standard(nx, ny, nt, nc, member as u64);
    let f = member as f64;
    let center = (-0.30 + 0.06 * f, 0.04 * f - 0.10);
    spec.ellipses[1].center = center;
    spec.ellipses[2].center = center;
    spec.ellipses[1].axes = (0.30 + 0.02 * f, 0.42 - 0.02 * f);
    spec.ellipses[2].axes = (0.13 + 0.015 * f, 0.24 - 0.012 * f);
    spec.ellipses[3].intensity = 0.10 + 0.07 * f;
    spec.ellipses[4].center = (0.25 + 0.03 * f, 0.50 - 0.04 * f);
    spec
}

fn family_kspace(member: usize, nt: usize) -> MultiCoilKSpace {
    let spec = family_spec(24, 24, nt, 2, member);
    let x = gen_cine_phantom(&spec).unwrap();
    let s = gen_sensitivities(24, 24, 2, 7, true);
    forward_apply(&x, &s, &SamplingMask::full(24)).unwrap()
}

#[test]
fn self_retrieval_across_distinct_family() {
    let f_acs = 6;
    let n_slices = 5;
    let slices: Vec<DictionarySlice> = (0..n_slices)
        .map(|k| DictionarySlice {
            slice_id: format!("slice{k}"),
            y_full: family_kspace(k, 5),
            mask: make_vdrs(24, 8, 1.0 / 3.0, 3.0, k as u64).unwrap(),
        })
        .collect();
    let dict = build_dictionary(&slices, f_acs).unwrap();

    // The construction must actually be distinct: pairwise low-frequency
    // references differ by at least 10% in relative energy.
    let refs: Vec<_> = slices
        .iter()
        .map(|s| lowfreq_frame(&s.y_full, 0, f_acs).unwrap())
        .collect();
    for a in 0..n_slices {
        for b in a + 1..n_slices {
            let diff: f64 = refs[a]
                .iter()
                .zip(refs[b].iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = refs[a].iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(
                diff / norm >= 0.10,
                "slices {a} and {b} differ by only {:.1}%",
                100.0 * diff / norm
            );
        }
    }

    for k in 0..n_slices {
        let sel = select_mask(&slices[k].y_full, &dict, f_acs).unwrap();
        assert_eq!(sel.neighbor_slice_id, format!("slice{k}"));
        assert_eq!(sel.mask, slices[k].mask);
    }
}

#[test]
fn selection_agrees_with_manual_scan_over_legal_centers() {
    let f_acs = 6;
    let slices: Vec<DictionarySlice> = (0..4)
        .map(|k| DictionarySlice {
            slice_id: format!("s{k}"),
            y_full: family_kspace(k, 6),
            mask: make_vdrs(24, 8, 1.0 / 3.0, 3.0, 50 + k as u64).unwrap(),
        })
        .collect();
    let dict = build_dictionary(&slices, f_acs).unwrap();

    let y_test = family_kspace(2, 4);
    let sel = select_mask(&y_test, &dict, f_acs).unwrap();

    // Manual scan restricted to centers 1..=nt-2 through the public API.
    let x_test = lowfreq_frame(&y_test, 0, f_acs).unwrap();
    let mut best: Option<(f64, String)> = None;
    for e in &dict.entries {
        let nt = e.lowfreq_frames.shape()[2];
        for i in 1..=nt - 2 {
            let d = nrmsd(&x_test, e, i).unwrap();
            let better = match &best {
                None => true,
                Some((bd, bid)) => d < *bd || (d == *bd && e.slice_id < *bid),
            };
            if better {
                best = Some((d, e.slice_id.clone()));
            }
        }
    }
    let (bd, bid) = best.unwrap();
    assert_eq!(sel.neighbor_slice_id, bid);
    assert!((sel.best_d - bd).abs() < 1e-15);
}

#[test]
fn deterministic_selection_under_exact_ties() {
    // Two entries with identical frame stacks: the lexicographically
    // smallest id must win regardless of insertion order.
    let f_acs = 6;
    let y = family_kspace(1, 5);
    let mask_a = make_vdrs(24, 8, 1.0 / 3.0, 3.0, 1).unwrap();
    let mask_b = make_vdrs(24, 8, 1.0 / 3.0, 3.0, 2).unwrap();
    let slices = vec![
        DictionarySlice {
            slice_id: "zz".into(),
            y_full: y.clone(),
            mask: mask_a,
        },
        DictionarySlice {
            slice_id: "aa".into(),
            y_full: y.clone(),
            mask: mask_b.clone(),
        },
    ];
    let dict = build_dictionary(&slices, f_acs).unwrap();
    let sel = select_mask(&y, &dict, f_acs).unwrap();
    assert_eq!(sel.neighbor_slice_id, "aa");
    assert_eq!(sel.mask, mask_b);
}
