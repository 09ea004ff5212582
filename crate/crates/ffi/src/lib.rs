//! C interface. Every fallible function returns an [`XimpStatus`]; on failure
//! a message is available from [`ximp_last_error`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ximp::autodiff::Checkpoint;
use ximp::chem::{parse_smiles, MolecularGraph};
use ximp::expressivity::{build_compound, wl_distinguishable, PlainGraph};
use ximp::harness::TrainedModel;
use ximp::model::featurize;
use ximp::reductions::{build_erg, build_junction_tree};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XimpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidCheckpoint = 4,
    ModelError = 5,
    InvalidArgument = 6,
    Panic = 7,
}

/// Graph view compared by [`ximp_wl_distinguishable`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XimpView {
    Molecule = 0,
    JunctionTree = 1,
    Erg = 2,
    Compound = 3,
}

/// A parsed molecule.
pub struct XimpMolecule {
    graph: MolecularGraph,
}

/// A trained model restored from a checkpoint.
pub struct XimpPredictor {
    model: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type Failure = (XimpStatus, String);

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> XimpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            XimpStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            XimpStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (XimpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (XimpStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ximp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn ximp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a SMILES string into a new molecule handle.
///
/// # Safety
/// `smiles` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ximp_molecule_parse(smiles: *const c_char, out: *mut *mut XimpMolecule) -> XimpStatus {
    guard(|| {
        let s = text(smiles, "smiles")?;
        let graph = parse_smiles(s).map_err(|e| (XimpStatus::ParseError, e.to_string()))?;
        write(out, Box::into_raw(Box::new(XimpMolecule { graph })))
    })
}

/// # Safety
/// `mol` must come from [`ximp_molecule_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ximp_molecule_free(mol: *mut XimpMolecule) {
    if !mol.is_null() {
        drop(Box::from_raw(mol));
    }
}

/// Writes the atom, bond and SSSR ring counts. Any output may be null.
///
/// # Safety
/// `mol` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ximp_molecule_counts(
    mol: *const XimpMolecule,
    atoms: *mut usize,
    bonds: *mut usize,
    rings: *mut usize,
) -> XimpStatus {
    guard(|| {
        let g = &handle(mol, "molecule")?.graph;
        for (p, v) in [(atoms, g.n_atoms()), (bonds, g.n_bonds()), (rings, g.rings().len())] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Whether unlabeled 1-WL tells the two molecules apart in `view`, one of
/// the [`XimpView`] values.
///
/// # Safety
/// `a` and `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ximp_wl_distinguishable(
    a: *const XimpMolecule,
    b: *const XimpMolecule,
    view: i32,
    out: *mut bool,
) -> XimpStatus {
    guard(|| {
        let (ga, gb) = (&handle(a, "first molecule")?.graph, &handle(b, "second molecule")?.graph);
        let graph = |g: &MolecularGraph| -> Result<PlainGraph, Failure> {
            Ok(match view {
                v if v == XimpView::Molecule as i32 => PlainGraph::from_molecule(g),
                v if v == XimpView::JunctionTree as i32 => PlainGraph::from_reduced(&build_junction_tree(g).0),
                v if v == XimpView::Erg as i32 => PlainGraph::from_reduced(&build_erg(g).0),
                v if v == XimpView::Compound as i32 => {
                    let (jt, sj) = build_junction_tree(g);
                    let (erg, se) = build_erg(g);
                    build_compound(g, &[&jt, &erg], &[&sj, &se]).graph
                }
                other => return Err((XimpStatus::InvalidArgument, format!("unknown view {other}"))),
            })
        };
        write(out, wl_distinguishable(&graph(ga)?, &graph(gb)?))
    })
}

/// Restores a predictor from checkpoint JSON.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ximp_predictor_load(json: *const c_char, out: *mut *mut XimpPredictor) -> XimpStatus {
    guard(|| {
        let s = text(json, "checkpoint")?;
        let ck = Checkpoint::from_json(s).map_err(|e| (XimpStatus::InvalidCheckpoint, e.to_string()))?;
        let model = TrainedModel::from_checkpoint(&ck).map_err(|e| (XimpStatus::InvalidCheckpoint, e.to_string()))?;
        write(out, Box::into_raw(Box::new(XimpPredictor { model })))
    })
}

/// # Safety
/// `predictor` must come from [`ximp_predictor_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ximp_predictor_free(predictor: *mut XimpPredictor) {
    if !predictor.is_null() {
        drop(Box::from_raw(predictor));
    }
}

/// Predicted property value in the original target units.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ximp_predictor_predict(
    predictor: *const XimpPredictor,
    mol: *const XimpMolecule,
    out: *mut f64,
) -> XimpStatus {
    guard(|| {
        let model = &handle(predictor, "predictor")?.model;
        let g = &handle(mol, "molecule")?.graph;
        let fail = |e: &dyn std::fmt::Display| (XimpStatus::ModelError, e.to_string());
        let input = featurize(g, &model.model.config).map_err(|e| fail(&e))?;
        let y = model.predict(&input).map_err(|e| fail(&e))?;
        write(out, y)
    })
}
