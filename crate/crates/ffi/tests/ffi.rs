use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use asrec::decode::select_constrained;
use asrec::scorer::ToyScorer;
use asrec::{EcConfig, NBestList, Utterance};
use asrec_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { asrec_string_free(s) };
    out
}

fn last_error() -> Option<String> {
    let p = asrec_last_error_message();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn cstrs(texts: &[&str]) -> (Vec<CString>, Vec<*const c_char>) {
    let owned: Vec<CString> = texts.iter().map(|t| CString::new(*t).unwrap()).collect();
    let ptrs = owned.iter().map(|c| c.as_ptr()).collect();
    (owned, ptrs)
}

fn nbest(entries: &[(&str, f64)]) -> *mut AsrecNBest {
    let texts: Vec<&str> = entries.iter().map(|e| e.0).collect();
    let scores: Vec<f64> = entries.iter().map(|e| e.1).collect();
    let (_owned, ptrs) = cstrs(&texts);
    let mut out = ptr::null_mut();
    let st = unsafe { asrec_nbest_new(ptrs.as_ptr(), scores.as_ptr(), entries.len(), &mut out) };
    assert_eq!(st, AsrecStatus::Ok, "{:?}", last_error());
    out
}

fn toy(marker: Option<&str>) -> *mut AsrecScorer {
    let m = marker.map(|m| CString::new(m).unwrap());
    let mut out = ptr::null_mut();
    let st =
        unsafe { asrec_scorer_new_toy(m.as_ref().map_or(ptr::null(), |c| c.as_ptr()), &mut out) };
    assert_eq!(st, AsrecStatus::Ok);
    out
}

const LIST: &[(&str, f64)] = &[
    ("i saw the cat on the mat", -1.0),
    ("i saw a cat on the mat", -1.2),
    ("i saw a cat on a mat", -2.5),
    ("eye saw a cat on the mat", -3.0),
];

const DISTINCT_HEADS: &[(&str, f64)] = &[
    ("we saw a cat", -2.0),
    ("i saw the cat", -1.0),
    ("they saw a cat", -1.5),
];

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(asrec_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn normalizes_both_modes() {
    let text = CString::new("Hello, World! It's well-known.").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { asrec_normalize(text.as_ptr(), AsrecNormMode::Eval, &mut out) },
        AsrecStatus::Ok
    );
    assert_eq!(take(out), "hello world it's well known");
    assert_eq!(
        unsafe { asrec_normalize(text.as_ptr(), AsrecNormMode::Stats, &mut out) },
        AsrecStatus::Ok
    );
    assert_eq!(take(out), "hello world its well known");
}

#[test]
fn align_counts_a_hand_checked_pair() {
    let r = CString::new("the cat sat").unwrap();
    let h = CString::new("The bat sat down.").unwrap();
    let mut c = AsrecCounts::default();
    assert_eq!(
        unsafe { asrec_align(r.as_ptr(), h.as_ptr(), &mut c) },
        AsrecStatus::Ok
    );
    assert_eq!(
        c,
        AsrecCounts {
            cor: 2,
            sub: 1,
            del: 0,
            ins: 1,
            ref_len: 3
        }
    );
}

#[test]
fn werr_and_error_reporting() {
    let mut x = 0.0;
    assert_eq!(unsafe { asrec_werr(7.37, 6.67, &mut x) }, AsrecStatus::Ok);
    assert!((x - 9.498).abs() < 1e-3);
    assert!(last_error().is_none());

    assert_eq!(
        unsafe { asrec_werr(0.0, 1.0, &mut x) },
        AsrecStatus::InvalidArgument
    );
    assert!(last_error().unwrap().contains("baseline"));

    let other = std::thread::spawn(last_error).join().unwrap();
    assert!(other.is_none());

    assert_eq!(unsafe { asrec_werr(2.0, 1.0, &mut x) }, AsrecStatus::Ok);
    assert!(last_error().is_none());
}

#[test]
fn null_and_bad_utf8_arguments() {
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { asrec_normalize(ptr::null(), AsrecNormMode::Eval, &mut out) },
        AsrecStatus::NullPointer
    );
    assert_eq!(last_error().unwrap(), "text is null");

    let text = CString::new("ok").unwrap();
    assert_eq!(
        unsafe { asrec_normalize(text.as_ptr(), AsrecNormMode::Eval, ptr::null_mut()) },
        AsrecStatus::NullPointer
    );

    let bad = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { asrec_normalize(bad.as_ptr().cast(), AsrecNormMode::Eval, &mut out) },
        AsrecStatus::InvalidUtf8
    );

    assert_eq!(unsafe { asrec_nbest_len(ptr::null()) }, 0);
    assert_eq!(unsafe { asrec_lattice_num_paths(ptr::null()) }, 0);
    unsafe {
        asrec_string_free(ptr::null_mut());
        asrec_nbest_free(ptr::null_mut());
        asrec_lattice_free(ptr::null_mut());
        asrec_scorer_free(ptr::null_mut());
    }
}

#[test]
fn nbest_is_reranked_by_score() {
    let nb = nbest(&[("low", -5.0), ("high", -0.5), ("mid", -1.0)]);
    assert_eq!(unsafe { asrec_nbest_len(nb) }, 3);
    let mut out = ptr::null_mut();
    let order: Vec<String> = (1..=3)
        .map(|r| {
            assert_eq!(
                unsafe { asrec_nbest_text(nb, r, &mut out) },
                AsrecStatus::Ok
            );
            take(out)
        })
        .collect();
    assert_eq!(order, ["high", "mid", "low"]);
    assert_eq!(
        unsafe { asrec_nbest_text(nb, 4, &mut out) },
        AsrecStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { asrec_nbest_text(nb, 0, &mut out) },
        AsrecStatus::InvalidArgument
    );
    unsafe { asrec_nbest_free(nb) };
}

#[test]
fn empty_nbest_is_rejected() {
    let mut out = ptr::null_mut();
    let st = unsafe { asrec_nbest_new([].as_ptr(), [].as_ptr(), 0, &mut out) };
    assert_eq!(st, AsrecStatus::InvalidArgument);
    assert!(out.is_null());
}

#[test]
fn selection_matches_the_library() {
    let nb = nbest(LIST);
    let sc = toy(None);
    let list = NBestList::new(LIST.iter().map(|(t, s)| (*t, *s))).unwrap();
    let utt = Utterance::new("u", None, list);
    for lambda in [0.0, 0.3, 0.5, 0.8, 1.0] {
        let cfg = AsrecConfig {
            lambda,
            n_input: 4,
            ..asrec_config_default()
        };
        let (mut rank, mut score) = (0usize, 0.0f64);
        assert_eq!(
            unsafe { asrec_select_constrained(nb, sc, &cfg, &mut rank, &mut score) },
            AsrecStatus::Ok
        );
        let want = select_constrained(
            &utt,
            &ToyScorer::new(),
            &EcConfig {
                lambda,
                n_input: 4,
                ..EcConfig::default()
            },
        )
        .unwrap();
        assert_eq!(rank, want.hypothesis.rank);
        assert_eq!(score, want.score);
    }
    let cfg = AsrecConfig {
        lambda: 0.0,
        n_input: 4,
        ..asrec_config_default()
    };
    let (mut rank, mut score) = (0usize, 0.0f64);
    unsafe { asrec_select_constrained(nb, sc, &cfg, &mut rank, &mut score) };
    assert_eq!((rank, score), (1, -1.0));

    let wide = AsrecConfig {
        n_input: 50,
        ..asrec_config_default()
    };
    assert_eq!(
        unsafe { asrec_select_constrained(nb, sc, &wide, &mut rank, &mut score) },
        AsrecStatus::Ok
    );

    let bad = AsrecConfig { lambda: 1.5, ..cfg };
    assert_eq!(
        unsafe { asrec_select_constrained(nb, sc, &bad, &mut rank, &mut score) },
        AsrecStatus::InvalidArgument
    );
    unsafe {
        asrec_nbest_free(nb);
        asrec_scorer_free(sc);
    }
}

#[test]
fn closest_map_breaks_ties_toward_lower_rank() {
    let nb = nbest(&[("a b c", -1.0), ("a b d", -2.0), ("a b", -3.0)]);
    let out = CString::new("A B D!").unwrap();
    let (mut rank, mut d) = (0usize, 0usize);
    assert_eq!(
        unsafe { asrec_closest_map(out.as_ptr(), nb, 3, &mut rank, &mut d) },
        AsrecStatus::Ok
    );
    assert_eq!((rank, d), (2, 0));
    let out = CString::new("a b e").unwrap();
    unsafe { asrec_closest_map(out.as_ptr(), nb, 3, &mut rank, &mut d) };
    assert_eq!((rank, d), (1, 1));
    unsafe { asrec_nbest_free(nb) };
}

#[test]
fn lattice_round_trip_and_decode() {
    let nb = nbest(LIST);
    let mut lat = ptr::null_mut();
    assert_eq!(
        unsafe { asrec_lattice_from_nbest(nb, &mut lat) },
        AsrecStatus::Ok
    );
    assert_eq!(unsafe { asrec_lattice_num_paths(lat) }, 4);

    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { asrec_lattice_to_json(lat, &mut json) },
        AsrecStatus::Ok
    );
    let json = CString::new(take(json)).unwrap();
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { asrec_lattice_from_json(json.as_ptr(), &mut back) },
        AsrecStatus::Ok
    );
    assert_eq!(unsafe { asrec_lattice_num_paths(back) }, 4);

    let sc = toy(None);
    let cfg = AsrecConfig {
        lambda: 0.0,
        beam_width: 4,
        ..asrec_config_default()
    };
    let (mut text, mut score) = (ptr::null_mut(), 0.0);
    assert_eq!(
        unsafe { asrec_lattice_decode(back, sc, nb, &cfg, &mut text, &mut score) },
        AsrecStatus::Ok
    );
    assert_eq!(take(text), "i saw a cat on a mat");
    assert!((score - LIST[0].1).abs() < 1e-9);

    let heads = nbest(DISTINCT_HEADS);
    let mut hl = ptr::null_mut();
    assert_eq!(
        unsafe { asrec_lattice_from_nbest(heads, &mut hl) },
        AsrecStatus::Ok
    );
    assert_eq!(
        unsafe { asrec_lattice_decode(hl, sc, heads, &cfg, &mut text, &mut score) },
        AsrecStatus::Ok
    );
    assert_eq!(take(text), "i saw the cat");
    assert_eq!(score, -1.0);
    unsafe {
        asrec_lattice_free(hl);
        asrec_nbest_free(heads);
    }

    let cfg = AsrecConfig {
        lambda: 0.5,
        beam_width: 4,
        ..asrec_config_default()
    };
    assert_eq!(
        unsafe { asrec_lattice_decode(back, sc, ptr::null(), &cfg, &mut text, &mut score) },
        AsrecStatus::Ok
    );
    let got = take(text);
    assert!(LIST.iter().any(|(t, _)| *t == got), "{got}");

    unsafe {
        asrec_lattice_free(lat);
        asrec_lattice_free(back);
        asrec_nbest_free(nb);
        asrec_scorer_free(sc);
    }
}

#[test]
fn decode_joins_with_the_scorer_convention() {
    let json = CString::new(
        r#"{"nodes":[{"id":0,"token":""},{"id":1,"token":"gu@@"},{"id":2,"token":"llet"},{"id":3,"token":""}],
            "edges":[{"from":0,"to":1,"score":-0.1},{"from":1,"to":2,"score":-0.1},{"from":2,"to":3,"score":0.0}],
            "start":0,"end":3}"#,
    )
    .unwrap();
    let mut lat = ptr::null_mut();
    assert_eq!(
        unsafe { asrec_lattice_from_json(json.as_ptr(), &mut lat) },
        AsrecStatus::Ok
    );
    let sc = toy(Some("continuation:@@"));
    let cfg = asrec_config_default();
    let (mut text, mut score) = (ptr::null_mut(), 0.0);
    assert_eq!(
        unsafe { asrec_lattice_decode(lat, sc, ptr::null(), &cfg, &mut text, &mut score) },
        AsrecStatus::Ok
    );
    assert_eq!(take(text), "gullet");
    unsafe {
        asrec_lattice_free(lat);
        asrec_scorer_free(sc);
    }
}

#[test]
fn malformed_lattices_are_reported() {
    let mut lat = ptr::null_mut();
    let junk = CString::new("{not json").unwrap();
    assert_eq!(
        unsafe { asrec_lattice_from_json(junk.as_ptr(), &mut lat) },
        AsrecStatus::Parse
    );
    let cyclic = CString::new(
        r#"{"nodes":[{"id":0,"token":""},{"id":1,"token":"a"},{"id":2,"token":""}],
            "edges":[{"from":0,"to":1,"score":0},{"from":1,"to":1,"score":0},{"from":1,"to":2,"score":0}],
            "start":0,"end":2}"#,
    )
    .unwrap();
    assert_eq!(
        unsafe { asrec_lattice_from_json(cyclic.as_ptr(), &mut lat) },
        AsrecStatus::Parse
    );
    assert!(last_error().is_some());
    assert!(lat.is_null());
}

#[test]
fn unknown_marker_is_rejected() {
    let m = CString::new("suffix:##").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { asrec_scorer_new_toy(m.as_ptr(), &mut out) },
        AsrecStatus::InvalidArgument
    );
    assert!(out.is_null());
}

#[test]
fn rover_votes() {
    let (_o, ptrs) = cstrs(&["a b c", "a x c", "a b c"]);
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { asrec_rover(ptrs.as_ptr(), [1.0, 1.0, 1.0].as_ptr(), 3, &mut out) },
        AsrecStatus::Ok
    );
    assert_eq!(take(out), "a b c");
    assert_eq!(
        unsafe { asrec_rover(ptrs.as_ptr(), [1.0, 5.0, 1.0].as_ptr(), 3, &mut out) },
        AsrecStatus::Ok
    );
    assert_eq!(take(out), "a x c");
    assert_eq!(
        unsafe { asrec_rover(ptrs.as_ptr(), [1.0, 0.0, 1.0].as_ptr(), 3, &mut out) },
        AsrecStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { asrec_rover(ptr::null(), ptr::null(), 0, &mut out) },
        AsrecStatus::NullPointer
    );
}

#[test]
fn unreachable_service_is_a_scorer_error() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let url = CString::new(format!("http://127.0.0.1:{port}")).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(
        unsafe { asrec_scorer_new_http(url.as_ptr(), ptr::null(), 0, 500, 1, 7, &mut sc) },
        AsrecStatus::Ok
    );
    let nb = nbest(LIST);
    let cfg = AsrecConfig {
        lambda: 0.5,
        n_input: 2,
        ..asrec_config_default()
    };
    let (mut rank, mut score) = (0usize, 0.0);
    assert_eq!(
        unsafe { asrec_select_constrained(nb, sc, &cfg, &mut rank, &mut score) },
        AsrecStatus::Scorer
    );
    assert!(last_error().is_some());

    let zero = AsrecConfig { lambda: 0.0, ..cfg };
    assert_eq!(
        unsafe { asrec_select_constrained(nb, sc, &zero, &mut rank, &mut score) },
        AsrecStatus::Ok
    );
    assert_eq!(rank, 1);

    let mut none = ptr::null_mut();
    assert_eq!(
        unsafe { asrec_scorer_new_http(url.as_ptr(), ptr::null(), 0, 500, 0, 7, &mut none) },
        AsrecStatus::InvalidArgument
    );
    unsafe {
        asrec_nbest_free(nb);
        asrec_scorer_free(sc);
    }
}

fn header() -> String {
    std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/asrec.h"))
        .unwrap()
}

#[test]
fn header_declares_every_export() {
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs"))
        .unwrap();
    let h = header();
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 20, "{exports:?}");
    for name in exports {
        assert!(
            h.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    for ty in [
        "typedef struct AsrecNBest AsrecNBest;",
        "ASREC_STATUS_SCORER = 6",
        "#ifndef ASREC_H",
    ] {
        assert!(h.contains(ty), "{ty}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(dir.join("asrec.h"))
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| {
            std::process::Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .ok_or(())
}
