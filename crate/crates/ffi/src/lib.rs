//! C interface to the vfmga pipeline, the LP solver and the MAVT aggregation.
//!
//! Every function returns a [`VfmgaStatus`]. On failure the message is kept
//! per thread and can be fetched with [`vfmga_last_error`]. Strings handed to
//! the caller are owned by the caller and released with [`vfmga_string_free`].
//! Handles are released with their matching `_free` function; passing NULL to
//! any `_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;
use std::slice;

use vfmga::lp::{self, Constraint, LinearProgram, LpSolution, LpStatus, Objective, Relation, VarId};
use vfmga::mavt;
use vfmga::orchestrator::{run_pipeline, Inputs, RunError, RunManifest, Stage};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VfmgaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Model = 6,
    Infeasible = 7,
    Unbounded = 8,
    Solver = 9,
    Preferences = 10,
    NotRun = 11,
    Panic = 255,
}

/// Relation of a constraint row.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VfmgaRelation {
    Le = 0,
    Ge = 1,
    Eq = 2,
}

/// Last pipeline stage to run, in execution order.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VfmgaStage {
    Optimize = 0,
    Groups = 1,
    Generate = 2,
    Evaluate = 3,
    Rank = 4,
    Analyse = 5,
}

/// Loaded run inputs plus the manifest of the last execution.
pub struct VfmgaRun {
    inputs: Inputs,
    manifest: Option<RunManifest>,
    out_dir: Option<PathBuf>,
}

/// A linear program under construction, and its last solution.
pub struct VfmgaLp {
    lp: LinearProgram,
    solution: Option<LpSolution>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(VfmgaStatus, String);

impl Failure {
    fn new(status: VfmgaStatus, msg: impl Into<String>) -> Self {
        Self(status, msg.into())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let status = match &e {
            RunError::Io { .. } => VfmgaStatus::Io,
            RunError::Json { .. } | RunError::Csv(_) => VfmgaStatus::Parse,
            RunError::Mavt(_) => VfmgaStatus::Preferences,
            RunError::Mga(_) => VfmgaStatus::Solver,
            _ => VfmgaStatus::Model,
        };
        Self(status, e.to_string())
    }
}

impl From<lp::LpError> for Failure {
    fn from(e: lp::LpError) -> Self {
        Self(VfmgaStatus::InvalidArgument, e.to_string())
    }
}

impl From<mavt::MavtError> for Failure {
    fn from(e: mavt::MavtError) -> Self {
        Self(VfmgaStatus::Preferences, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records any failure or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VfmgaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            VfmgaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VfmgaStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(Failure::new(VfmgaStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Failure::new(VfmgaStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(h: *mut T) -> Result<&'a mut T, Failure> {
    h.as_mut()
        .ok_or_else(|| Failure::new(VfmgaStatus::NullPointer, "handle is NULL"))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(VfmgaStatus::NullPointer, "output pointer is NULL"))
}

unsafe fn array<'a, T>(p: *const T, n: usize) -> Result<&'a [T], Failure> {
    match (p.is_null(), n) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(Failure::new(VfmgaStatus::NullPointer, "array is NULL")),
        (false, _) => Ok(slice::from_raw_parts(p, n)),
    }
}

fn to_c(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(VfmgaStatus::InvalidArgument, "string contains NUL"))
}

/// Message of the last failed call on this thread, or NULL. Free with
/// [`vfmga_string_free`].
#[no_mangle]
pub extern "C" fn vfmga_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().clone().map_or(ptr::null_mut(), CString::into_raw))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vfmga_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static; do not free.
#[no_mangle]
pub extern "C" fn vfmga_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a run configuration and the files it references.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `run` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vfmga_run_load(config_path: *const c_char, run: *mut *mut VfmgaRun) -> VfmgaStatus {
    guard(|| {
        let slot = out(run)?;
        *slot = ptr::null_mut();
        let inputs = Inputs::load(path_arg(config_path, "config_path")?)?;
        *slot = Box::into_raw(Box::new(VfmgaRun {
            inputs,
            manifest: None,
            out_dir: None,
        }));
        Ok(())
    })
}

/// Runs the pipeline up to and including `last`, a [`VfmgaStage`] value,
/// writing artifacts to `out_dir`.
///
/// # Safety
/// `run` must come from [`vfmga_run_load`]; `out_dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vfmga_run_execute(run: *mut VfmgaRun, out_dir: *const c_char, last: u32) -> VfmgaStatus {
    guard(|| {
        let run = handle(run)?;
        let dir = path_arg(out_dir, "out_dir")?;
        let stage = *Stage::ALL
            .get(last as usize)
            .ok_or_else(|| Failure::new(VfmgaStatus::InvalidArgument, format!("no stage {last}")))?;
        run.manifest = Some(run_pipeline(&run.inputs, dir, stage)?);
        run.out_dir = Some(dir.to_path_buf());
        Ok(())
    })
}

fn manifest(run: &VfmgaRun) -> Result<&RunManifest, Failure> {
    run.manifest
        .as_ref()
        .ok_or_else(|| Failure::new(VfmgaStatus::NotRun, "pipeline has not been executed"))
}

/// Optimal system cost of the last execution.
///
/// # Safety
/// `run` must come from [`vfmga_run_load`]; `f_star` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vfmga_run_optimal_cost(run: *const VfmgaRun, f_star: *mut f64) -> VfmgaStatus {
    guard(|| {
        let m = manifest(handle(run.cast_mut())?)?;
        *out(f_star)? = m.f_star.ok_or_else(|| Failure::new(VfmgaStatus::NotRun, "no optimum"))?;
        Ok(())
    })
}

/// Number of distinct alternatives, cost optimum included, of the last execution.
///
/// # Safety
/// `run` must come from [`vfmga_run_load`]; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vfmga_run_alternative_count(run: *const VfmgaRun, count: *mut usize) -> VfmgaStatus {
    guard(|| {
        let m = manifest(handle(run.cast_mut())?)?;
        *out(count)? = m.counts.alternatives;
        Ok(())
    })
}

/// Manifest of the last execution as JSON. Free with [`vfmga_string_free`].
///
/// # Safety
/// `run` must come from [`vfmga_run_load`]; `json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vfmga_run_manifest_json(run: *const VfmgaRun, json: *mut *mut c_char) -> VfmgaStatus {
    guard(|| {
        let slot = out(json)?;
        *slot = ptr::null_mut();
        let m = manifest(handle(run.cast_mut())?)?;
        let text = serde_json::to_string(m).map_err(|e| Failure::new(VfmgaStatus::Parse, e.to_string()))?;
        *slot = to_c(text)?;
        Ok(())
    })
}

/// 1-based rank of `alternative` for `stakeholder` in the last execution.
///
/// # Safety
/// `run` must come from [`vfmga_run_load`]; both strings NUL-terminated; `rank` writable.
#[no_mangle]
pub unsafe extern "C" fn vfmga_run_rank_of(
    run: *const VfmgaRun,
    stakeholder: *const c_char,
    alternative: *const c_char,
    rank: *mut usize,
) -> VfmgaStatus {
    guard(|| {
        let run = handle(run.cast_mut())?;
        manifest(run)?;
        let who = path_arg(stakeholder, "stakeholder")?.to_string_lossy().into_owned();
        let alt = path_arg(alternative, "alternative")?.to_string_lossy().into_owned();
        let dir = run.out_dir.as_ref().expect("set with the manifest");
        let path = dir.join("rankings.json");
        let raw = std::fs::read(&path).map_err(|e| Failure::new(VfmgaStatus::Io, format!("{}: {e}", path.display())))?;
        let rankings: Vec<mavt::Ranking> =
            serde_json::from_slice(&raw).map_err(|e| Failure::new(VfmgaStatus::Parse, e.to_string()))?;
        let r = rankings
            .iter()
            .find(|r| r.stakeholder == who)
            .ok_or_else(|| Failure::new(VfmgaStatus::InvalidArgument, format!("unknown stakeholder {who}")))?;
        *out(rank)? = r
            .rank_of(&alt)
            .ok_or_else(|| Failure::new(VfmgaStatus::InvalidArgument, format!("unknown alternative {alt}")))?;
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or come from [`vfmga_run_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vfmga_run_free(run: *mut VfmgaRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Empty program with objective zero. Never NULL.
#[no_mangle]
pub extern "C" fn vfmga_lp_new() -> *mut VfmgaLp {
    Box::into_raw(Box::new(VfmgaLp {
        lp: LinearProgram::new(),
        solution: None,
    }))
}

/// Adds a variable with bounds `[lower, upper]`; infinities are allowed.
///
/// # Safety
/// `lp` must come from [`vfmga_lp_new`]; `index` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vfmga_lp_add_variable(lp: *mut VfmgaLp, lower: f64, upper: f64, index: *mut usize) -> VfmgaStatus {
    guard(|| {
        let h = handle(lp)?;
        let slot = out(index)?;
        let n = h.lp.num_variables();
        *slot = h.lp.add_variable(format!("x{n}"), lower, upper)?.0;
        h.solution = None;
        Ok(())
    })
}

/// Adds the row `Σ coefs[k] x[vars[k]] (relation) rhs`; `relation` is a
/// [`VfmgaRelation`] value.
///
/// # Safety
/// `lp` must come from [`vfmga_lp_new`]; `vars` and `coefs` must hold `n` entries.
#[no_mangle]
pub unsafe extern "C" fn vfmga_lp_add_constraint(
    lp: *mut VfmgaLp,
    n: usize,
    vars: *const usize,
    coefs: *const f64,
    relation: u32,
    rhs: f64,
) -> VfmgaStatus {
    guard(|| {
        let h = handle(lp)?;
        let terms = terms(array(vars, n)?, array(coefs, n)?);
        let relation = match relation {
            r if r == VfmgaRelation::Le as u32 => Relation::Le,
            r if r == VfmgaRelation::Ge as u32 => Relation::Ge,
            r if r == VfmgaRelation::Eq as u32 => Relation::Eq,
            r => return Err(Failure::new(VfmgaStatus::InvalidArgument, format!("no relation {r}"))),
        };
        let name = format!("r{}", h.lp.num_constraints());
        h.lp.push_constraint(Constraint::new(name, terms, relation, rhs))?;
        h.solution = None;
        Ok(())
    })
}

fn terms(vars: &[usize], coefs: &[f64]) -> Vec<(VarId, f64)> {
    vars.iter().zip(coefs).map(|(&v, &c)| (VarId(v), c)).collect()
}

/// Sets the objective `offset + Σ coefs[k] x[vars[k]]`, minimised.
///
/// # Safety
/// `lp` must come from [`vfmga_lp_new`]; `vars` and `coefs` must hold `n` entries.
#[no_mangle]
pub unsafe extern "C" fn vfmga_lp_set_objective(
    lp: *mut VfmgaLp,
    n: usize,
    vars: *const usize,
    coefs: *const f64,
    offset: f64,
) -> VfmgaStatus {
    guard(|| {
        let h = handle(lp)?;
        let terms = terms(array(vars, n)?, array(coefs, n)?);
        h.lp.set_objective(Objective { terms, offset })?;
        h.solution = None;
        Ok(())
    })
}

/// Solves the program. Returns `Infeasible` or `Unbounded` when no optimum exists.
///
/// # Safety
/// `lp` must come from [`vfmga_lp_new`]; `objective` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vfmga_lp_solve(lp: *mut VfmgaLp, objective: *mut f64) -> VfmgaStatus {
    guard(|| {
        let h = handle(lp)?;
        let slot = out(objective)?;
        h.solution = None;
        let sol = lp::solve(&h.lp).map_err(|e| Failure::new(VfmgaStatus::Solver, e.to_string()))?;
        match sol.status {
            LpStatus::Optimal => {
                *slot = sol.objective;
                h.solution = Some(sol);
                Ok(())
            }
            LpStatus::Infeasible => Err(Failure::new(VfmgaStatus::Infeasible, "program is infeasible")),
            LpStatus::Unbounded => Err(Failure::new(VfmgaStatus::Unbounded, "program is unbounded")),
        }
    })
}

/// Value of variable `index` in the last optimal solution.
///
/// # Safety
/// `lp` must come from [`vfmga_lp_new`]; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vfmga_lp_value(lp: *const VfmgaLp, index: usize, value: *mut f64) -> VfmgaStatus {
    guard(|| {
        let h = handle(lp.cast_mut())?;
        let sol = h
            .solution
            .as_ref()
            .ok_or_else(|| Failure::new(VfmgaStatus::NotRun, "no optimal solution"))?;
        *out(value)? = *sol
            .values
            .get(index)
            .ok_or_else(|| Failure::new(VfmgaStatus::InvalidArgument, format!("no variable {index}")))?;
        Ok(())
    })
}

/// # Safety
/// `lp` must be NULL or come from [`vfmga_lp_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vfmga_lp_free(lp: *mut VfmgaLp) {
    if !lp.is_null() {
        drop(Box::from_raw(lp));
    }
}

/// Weighted power mean of `values` with exponent `gamma >= 0`. Weights are
/// normalised by their sum, which must be positive.
///
/// # Safety
/// `weights` and `values` must hold `n` entries; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vfmga_aggregate(
    n: usize,
    weights: *const f64,
    values: *const f64,
    gamma: f64,
    result: *mut f64,
) -> VfmgaStatus {
    guard(|| {
        let pairs: Vec<(f64, f64)> = array(weights, n)?.iter().copied().zip(array(values, n)?.iter().copied()).collect();
        *out(result)? = mavt::aggregate(&pairs, gamma)?;
        Ok(())
    })
}
