//! C ABI over the `datamarket` library.
//!
//! Every fallible function returns a [`DmStatus`]; on failure the message is
//! available from [`dm_last_error`] on the same thread. Output pointers are
//! written only on success. Panics never cross the boundary: they surface as
//! `DM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use datamarket::ahp::{self, JudgmentMatrix, RatioMatrix, WeightVector};
use datamarket::bargain::{self, BargainParams};
use datamarket::config::parse_config_str;
use datamarket::market::{seed_range, Market, ParticipantKind, RunRecord};
use datamarket::quality::{self, default_quality_weights, QualityLevel, QualityVector};
use datamarket::satisfaction::{self, default_satisfaction_weights, DiscountParams};
use datamarket::shapley::{shapley_from_values, MAX_EXACT_SHARDS};
use datamarket::{report, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Numeric = 3,
    Parameter = 4,
    Unsupported = 5,
    Parse = 6,
    Config = 7,
    Corpus = 8,
    Io = 9,
    OutOfRange = 10,
    Panic = 11,
}

impl From<&Error> for DmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Validation(_) => DmStatus::Validation,
            Error::Numeric(_) => DmStatus::Numeric,
            Error::Parameter(_) => DmStatus::Parameter,
            Error::Unsupported(_) => DmStatus::Unsupported,
            Error::Parse(_) => DmStatus::Parse,
            Error::Config { .. } => DmStatus::Config,
            Error::Corpus(_) => DmStatus::Corpus,
            Error::Io(_) => DmStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

enum Failure {
    Lib(Error),
    Status(DmStatus, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> DmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DmStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            DmStatus::from(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            DmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(DmStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> FfiResult<&'a mut [T]> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn weights_or(p: *const f64, n: usize, default: WeightVector) -> FfiResult<WeightVector> {
    if p.is_null() {
        Ok(default)
    } else {
        Ok(WeightVector::new(slice::from_raw_parts(p, n).to_vec())?)
    }
}

unsafe fn grades(p: *const f64) -> FfiResult<QualityVector> {
    let s = input(p, 4, "grades")?;
    let mut levels = [QualityLevel::Fair; 4];
    for (l, v) in levels.iter_mut().zip(s) {
        *l = QualityLevel::from_score(*v)?;
    }
    Ok(QualityVector::from_levels(levels))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn dm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DmConsistency {
    pub lambda_max: f64,
    pub ci: f64,
    pub cr: f64,
    pub ri: f64,
    pub passed: bool,
}

fn write_ahp(w: &WeightVector, r: &ahp::ConsistencyReport, weights_out: &mut [f64], report_out: *mut DmConsistency) {
    weights_out.copy_from_slice(w.as_slice());
    // SAFETY: caller passes null or a valid pointer
    if let Some(o) = unsafe { report_out.as_mut() } {
        *o = DmConsistency {
            lambda_max: r.lambda_max,
            ci: r.ci,
            cr: r.cr,
            ri: r.ri,
            passed: r.passed,
        };
    }
}

/// Principal-eigenvector weights of a row-major `n`×`n` ratio matrix.
/// `weights_out` holds `n` doubles; `report_out` may be null.
///
/// # Safety
/// `matrix` must point to `n*n` doubles and `weights_out` to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_ahp_weights_from_ratios(
    matrix: *const f64,
    n: usize,
    weights_out: *mut f64,
    report_out: *mut DmConsistency,
) -> DmStatus {
    guard(|| {
        let m = input(matrix, n * n, "matrix")?;
        let rows = m.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let (w, r) = ahp::weights_from_ratios(&RatioMatrix::new(rows)?)?;
        write_ahp(&w, &r, output(weights_out, n, "weights_out")?, report_out);
        Ok(())
    })
}

/// Weights from a row-major `n`×`n` judgment matrix with entries 0, 1, 2.
///
/// # Safety
/// `judgments` must point to `n*n` bytes and `weights_out` to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_ahp_derive_weights(
    judgments: *const u8,
    n: usize,
    base: f64,
    weights_out: *mut f64,
    report_out: *mut DmConsistency,
) -> DmStatus {
    guard(|| {
        let m = input(judgments, n * n, "judgments")?;
        let rows = m.chunks(n.max(1)).map(<[u8]>::to_vec).collect();
        let (w, r) = ahp::derive_weights(&JudgmentMatrix::new(rows)?, base)?;
        write_ahp(&w, &r, output(weights_out, n, "weights_out")?, report_out);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DmReserve {
    pub v1: f64,
    pub v2: f64,
    pub r0: f64,
    pub rs: f64,
}

/// Quality-adjusted reserve. `grades` holds four admitted scores
/// (1.2, 1.0, 0.6, 0.4, 0.2); `weights` four weights or null for the defaults.
///
/// # Safety
/// `grades` must point to 4 doubles, `weights` to 4 doubles or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_seller_reserve(
    v1: f64,
    v2: f64,
    grades: *const f64,
    weights: *const f64,
    out_reserve: *mut DmReserve,
) -> DmStatus {
    guard(|| {
        let q = self::grades(grades)?;
        let w = weights_or(weights, 4, default_quality_weights())?;
        let r = quality::seller_reserve(v1, v2, &q, &w)?;
        *out(out_reserve, "out_reserve")? = DmReserve {
            v1: r.v1,
            v2: r.v2,
            r0: r.r0,
            rs: r.rs,
        };
        Ok(())
    })
}

/// Satisfaction of a buyer with utility `xi` for a dataset graded `grades`.
/// `weights` holds five weights (utility last) or is null for the defaults.
///
/// # Safety
/// `grades` must point to 4 doubles, `weights` to 5 doubles or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_buyer_satisfaction(
    xi: f64,
    grades: *const f64,
    weights: *const f64,
    out_value: *mut f64,
) -> DmStatus {
    guard(|| {
        let q = self::grades(grades)?;
        let w = weights_or(weights, 5, default_satisfaction_weights())?;
        *out(out_value, "out_value")? = satisfaction::buyer_satisfaction(xi, &q, &w)?;
        Ok(())
    })
}

/// Logistic discount of one buyer.
///
/// # Safety
/// `out_value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dm_logistic_discount(satisfaction: f64, k: f64, midpoint: f64, out_value: *mut f64) -> DmStatus {
    guard(|| {
        let p = DiscountParams::new(k, midpoint, 0.0)?;
        *out(out_value, "out_value")? = satisfaction::logistic_discount(satisfaction, &p);
        Ok(())
    })
}

/// Budget-weighted alliance discount over `n` members.
///
/// # Safety
/// `deltas` and `budgets` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_alliance_discount(
    deltas: *const f64,
    budgets: *const f64,
    n: usize,
    out_value: *mut f64,
) -> DmStatus {
    guard(|| {
        let d = input(deltas, n, "deltas")?;
        let b = input(budgets, n, "budgets")?;
        *out(out_value, "out_value")? = satisfaction::alliance_discount(d, b)?;
        Ok(())
    })
}

/// `(1 + eta)·delta_b`; fails with `DM_STATUS_PARAMETER` when the result is not below 1.
///
/// # Safety
/// `out_value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dm_platform_adjust(delta_b: f64, eta: f64, out_value: *mut f64) -> DmStatus {
    guard(|| {
        *out(out_value, "out_value")? = satisfaction::platform_adjust(delta_b, eta)?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DmBargainParams {
    pub r_s: f64,
    pub r_b: f64,
    pub delta_s: f64,
    pub delta_eta_b: f64,
    pub p1: f64,
    pub p2: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl DmBargainParams {
    fn to_params(self) -> FfiResult<BargainParams> {
        let p = BargainParams {
            r_s: self.r_s,
            r_b: self.r_b,
            delta_s: self.delta_s,
            delta_eta_b: self.delta_eta_b,
            p1: self.p1,
            p2: self.p2,
            alpha: self.alpha,
            tau: self.tau,
        };
        p.validate()?;
        Ok(p)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DmEquilibrium {
    pub price: f64,
    pub seller_extra: f64,
    pub buyer_extra: f64,
    pub feasible: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DmStagePayoffs {
    pub stage: u8,
    pub price: f64,
    pub is_profit: f64,
    pub ib_profit: f64,
}

unsafe fn params(p: *const DmBargainParams) -> FfiResult<BargainParams> {
    p.as_ref().ok_or_else(|| null("params"))?.to_params()
}

/// Closed-form equilibrium price.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dm_equilibrium_price(p: *const DmBargainParams, out_result: *mut DmEquilibrium) -> DmStatus {
    guard(|| {
        let r = bargain::equilibrium_price(&params(p)?)?;
        *out(out_result, "out_result")? = DmEquilibrium {
            price: r.price,
            seller_extra: r.seller_extra,
            buyer_extra: r.buyer_extra,
            feasible: r.feasible,
        };
        Ok(())
    })
}

/// Equilibrium price by fixed-point iteration.
/// `out_iterations` may be null.
///
/// # Safety
/// `p` and `out_price` must be valid; `out_iterations` valid or null.
#[no_mangle]
pub unsafe extern "C" fn dm_fixed_point_oracle(
    p: *const DmBargainParams,
    tol: f64,
    max_iter: usize,
    out_price: *mut f64,
    out_iterations: *mut usize,
) -> DmStatus {
    guard(|| {
        let fp = bargain::fixed_point_oracle(&params(p)?, tol, max_iter)?;
        *out(out_price, "out_price")? = fp.price;
        if let Some(i) = out_iterations.as_mut() {
            *i = fp.iterations;
        }
        Ok(())
    })
}

/// Payoffs if `offer` is accepted at `stage` (1, 2 or 3).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dm_stage_payoffs(
    p: *const DmBargainParams,
    stage: u8,
    offer: f64,
    out_payoffs: *mut DmStagePayoffs,
) -> DmStatus {
    guard(|| {
        let s = bargain::stage_payoffs(&params(p)?, stage, offer)?;
        *out(out_payoffs, "out_payoffs")? = DmStagePayoffs {
            stage: s.stage,
            price: s.price,
            is_profit: s.is_profit,
            ib_profit: s.ib_profit,
        };
        Ok(())
    })
}

/// The alliance's stage-2 counteroffer against a stage-3 price.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dm_buyer_counteroffer(p: *const DmBargainParams, p3_price: f64, out_price: *mut f64) -> DmStatus {
    guard(|| {
        *out(out_price, "out_price")? = bargain::buyer_counteroffer(&params(p)?, p3_price);
        Ok(())
    })
}

/// Coalition value callback: bit `i` of `mask` set means player `i` is in.
pub type DmCoalitionValue = Option<unsafe extern "C" fn(mask: u64, user_data: *mut c_void) -> f64>;

/// Exact Shapley values of an `n`-player game given by `value`, which is
/// called exactly `2^n` times, sequentially, on the calling thread.
///
/// # Safety
/// `out_values` must point to `n` doubles; `value` must be safe to call with `user_data`.
#[no_mangle]
pub unsafe extern "C" fn dm_shapley_exact(
    n: usize,
    value: DmCoalitionValue,
    user_data: *mut c_void,
    out_values: *mut f64,
) -> DmStatus {
    guard(|| {
        let f = value.ok_or_else(|| null("value"))?;
        if n > MAX_EXACT_SHARDS {
            return Err(Error::Unsupported(format!("{n} players exceed exact enumeration (max {MAX_EXACT_SHARDS})")).into());
        }
        let out_values = output(out_values, n, "out_values")?;
        let mut values = Vec::with_capacity(1 << n);
        for mask in 0..1u64 << n {
            let v = f(mask, user_data);
            if !v.is_finite() {
                return Err(Error::Numeric(format!("coalition {mask:#x} has non-finite value {v}")).into());
            }
            values.push(v);
        }
        out_values.copy_from_slice(&shapley_from_values(n, &values));
        Ok(())
    })
}

/// Opaque market simulation handle.
pub struct DmSimulation {
    market: Market,
    records: Vec<RunRecord>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmParticipantKind {
    Seller = 0,
    Buyer = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DmRunRecord {
    pub seed: u64,
    pub kind: DmParticipantKind,
    /// NUL-terminated participant id such as "S1" or "B3".
    pub id: [c_char; 16],
    pub reserve_or_budget: f64,
    pub price_or_payment: f64,
    pub extra_profit: f64,
    pub feasible: bool,
}

unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::Status(DmStatus::Parse, format!("`{what}` is not UTF-8")))
}

/// Creates a simulation from TOML text (null for defaults). Free it with
/// [`dm_simulation_free`].
///
/// # Safety
/// `config_toml` must be null or NUL-terminated; `out_sim` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dm_simulation_new(config_toml: *const c_char, out_sim: *mut *mut DmSimulation) -> DmStatus {
    guard(|| {
        let slot = out(out_sim, "out_sim")?;
        let cfg = parse_config_str(opt_str(config_toml, "config_toml")?.unwrap_or(""))?;
        let sim = DmSimulation {
            market: Market::new(cfg.scenario)?,
            records: Vec::new(),
        };
        *slot = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// Runs seeds `first_seed .. first_seed + seeds`, replacing earlier records.
///
/// # Safety
/// `sim` must come from [`dm_simulation_new`].
#[no_mangle]
pub unsafe extern "C" fn dm_simulation_run(sim: *mut DmSimulation, first_seed: u64, seeds: usize) -> DmStatus {
    guard(|| {
        let sim = out(sim, "sim")?;
        sim.records = sim.market.run_seeds(&seed_range(first_seed, seeds))?;
        Ok(())
    })
}

/// Number of records from the last run; 0 for a null handle.
///
/// # Safety
/// `sim` must be null or come from [`dm_simulation_new`].
#[no_mangle]
pub unsafe extern "C" fn dm_simulation_record_count(sim: *const DmSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.records.len())
}

/// Copies record `index` into `out_record`.
///
/// # Safety
/// `sim` must come from [`dm_simulation_new`]; `out_record` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dm_simulation_get_record(
    sim: *const DmSimulation,
    index: usize,
    out_record: *mut DmRunRecord,
) -> DmStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        let r = sim.records.get(index).ok_or_else(|| {
            Failure::Status(
                DmStatus::OutOfRange,
                format!("record {index} out of range ({} records)", sim.records.len()),
            )
        })?;
        let mut id = [0 as c_char; 16];
        for (dst, src) in id.iter_mut().zip(r.id.bytes().take(15)) {
            *dst = src as c_char;
        }
        *out(out_record, "out_record")? = DmRunRecord {
            seed: r.seed,
            kind: match r.kind {
                ParticipantKind::Seller => DmParticipantKind::Seller,
                ParticipantKind::Buyer => DmParticipantKind::Buyer,
            },
            id,
            reserve_or_budget: r.reserve_or_budget,
            price_or_payment: r.price_or_payment,
            extra_profit: r.extra_profit,
            feasible: r.feasible,
        };
        Ok(())
    })
}

/// Writes the records of the last run as CSV to `path`.
///
/// # Safety
/// `sim` must come from [`dm_simulation_new`]; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dm_simulation_write_csv(sim: *const DmSimulation, path: *const c_char) -> DmStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        let path = opt_str(path, "path")?.ok_or_else(|| null("path"))?;
        std::fs::write(path, report::records_csv(&sim.records)).map_err(Error::from)?;
        Ok(())
    })
}

/// Releases a simulation. Null is ignored.
///
/// # Safety
/// `sim` must be null or come from [`dm_simulation_new`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dm_simulation_free(sim: *mut DmSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
