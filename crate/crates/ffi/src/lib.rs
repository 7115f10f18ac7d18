//! C ABI over `dpsim`.
//!
//! Every fallible function returns a [`DpsimStatus`]; on failure a message is
//! available from [`dpsim_last_error`] on the same thread. Objects are opaque
//! handles created by `*_new`/`*_from_*` and released with the matching
//! `*_free`. Strings handed out by the library are released with
//! [`dpsim_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dpsim::config::RunConfig;
use dpsim::engine::{run_tournament, score_simulation};
use dpsim::market::{realize_period, sample_market_params, MarketParams};
use dpsim::pipeline::execute;
use dpsim::rng::RngStream;
use dpsim::stats::lambert_w;
use dpsim::strategies::build_roster;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DpsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    RunError = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DpsimStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(DpsimStatus::NullPointer, format!("`{what}` is null"))
    }

    fn arg(msg: impl Into<String>) -> Self {
        Failure(DpsimStatus::InvalidArgument, msg.into())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Run `f`, converting failures and panics into a status plus stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DpsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DpsimStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            DpsimStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::arg(format!("`{what}` is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dpsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dpsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn dpsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Principal branch of the Lambert W function for `x >= 0`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dpsim_lambert_w(x: f64, out: *mut f64) -> DpsimStatus {
    guard(|| {
        let out = out_slice(out, 1, "out")?;
        out[0] = lambert_w(x).map_err(|e| Failure::arg(e.to_string()))?;
        Ok(())
    })
}

/// Final scores of one simulation from raw revenues.
///
/// `oligopoly` holds `m` revenues, `duopoly` an `m x m` row-major matrix
/// where entry `(j, k)` is slot `j`'s revenue against `k`. `out_final`
/// receives `m` scores.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn dpsim_score_simulation(
    m: usize,
    oligopoly: *const f64,
    duopoly: *const f64,
    out_final: *mut f64,
) -> DpsimStatus {
    guard(|| {
        if m < 2 {
            return Err(Failure::arg(format!("need at least 2 competitors, got {m}")));
        }
        let olig = slice_arg(oligopoly, m, "oligopoly")?;
        let duo = slice_arg(duopoly, m * m, "duopoly")?;
        let out = out_slice(out_final, m, "out_final")?;
        if olig.iter().chain(duo).any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Failure::arg("revenues must be finite and nonnegative"));
        }
        let rows: Vec<Vec<f64>> = duo.chunks(m).map(<[f64]>::to_vec).collect();
        out.copy_from_slice(&score_simulation(olig, &rows).final_share);
        Ok(())
    })
}

/// A sampled market with its own random stream.
pub struct DpsimMarket {
    params: MarketParams,
    competitors: usize,
    rng: RngStream,
}

/// Sample market parameters for `competitors` sellers from `seed`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dpsim_market_new(competitors: usize, seed: u64, out: *mut *mut DpsimMarket) -> DpsimStatus {
    guard(|| {
        let out = out_slice(out, 1, "out")?;
        if competitors < 2 {
            return Err(Failure::arg(format!("need at least 2 competitors, got {competitors}")));
        }
        let root = RngStream::from_seed(seed);
        let params = sample_market_params(competitors, &mut root.child("market-params")).map_err(|e| Failure::arg(e.to_string()))?;
        out[0] = Box::into_raw(Box::new(DpsimMarket { params, competitors, rng: root.child("market") }));
        Ok(())
    })
}

/// # Safety
/// `market` must come from [`dpsim_market_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dpsim_market_free(market: *mut DpsimMarket) {
    if !market.is_null() {
        drop(Box::from_raw(market));
    }
}

/// Market parameters as a JSON object; free with [`dpsim_string_free`].
///
/// # Safety
/// `market` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dpsim_market_params_json(market: *const DpsimMarket, out: *mut *mut c_char) -> DpsimStatus {
    guard(|| {
        let market = market.as_ref().ok_or_else(|| Failure::null("market"))?;
        let out = out_slice(out, 1, "out")?;
        let json = serde_json::to_string(&market.params).map_err(|e| Failure(DpsimStatus::RunError, e.to_string()))?;
        out[0] = to_c_string(json);
        Ok(())
    })
}

/// Realise one period of demand at `prices`.
///
/// `n` must be 2 or the market's competitor count. `out_sales` and
/// `out_revenue` receive `n` values each.
///
/// # Safety
/// Pointers must be valid for `n` elements and `market` a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpsim_market_realize(
    market: *mut DpsimMarket,
    prices: *const f64,
    n: usize,
    out_sales: *mut u32,
    out_revenue: *mut f64,
) -> DpsimStatus {
    guard(|| {
        let market = market.as_mut().ok_or_else(|| Failure::null("market"))?;
        let prices = slice_arg(prices, n, "prices")?;
        let sales = out_slice(out_sales, n, "out_sales")?;
        let revenue = out_slice(out_revenue, n, "out_revenue")?;
        if n != 2 && n != market.competitors {
            return Err(Failure::arg(format!("market is calibrated for 2 or {} competitors, got {n}", market.competitors)));
        }
        if prices.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Failure::arg("prices must be finite and nonnegative"));
        }
        let o = realize_period(prices, &market.params, &mut market.rng).map_err(|e| Failure::arg(e.to_string()))?;
        for (k, s) in sales.iter_mut().enumerate() {
            *s = o.total_sales(k);
        }
        revenue.copy_from_slice(&o.revenue);
        Ok(())
    })
}

/// A validated tournament configuration.
pub struct DpsimTournament {
    config: RunConfig,
}

/// Parse a TOML run configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dpsim_tournament_from_toml(toml: *const c_char, out: *mut *mut DpsimTournament) -> DpsimStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        let out = out_slice(out, 1, "out")?;
        let config = RunConfig::from_toml(text).map_err(|e| Failure(DpsimStatus::ConfigError, e.to_string()))?;
        out[0] = Box::into_raw(Box::new(DpsimTournament { config }));
        Ok(())
    })
}

/// # Safety
/// `t` must come from [`dpsim_tournament_from_toml`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dpsim_tournament_free(t: *mut DpsimTournament) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of roster slots, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpsim_tournament_roster_len(t: *const DpsimTournament) -> usize {
    t.as_ref().map_or(0, |t| t.config.roster.len())
}

/// Run the tournament in memory and write each slot's mean final score.
///
/// `len` must equal the roster length.
///
/// # Safety
/// `t` must be a live handle and `out_scores` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dpsim_tournament_run(t: *const DpsimTournament, out_scores: *mut f64, len: usize) -> DpsimStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| Failure::null("tournament"))?;
        let out = out_slice(out_scores, len, "out_scores")?;
        if len != t.config.roster.len() {
            return Err(Failure::arg(format!("roster has {} slots, buffer has {len}", t.config.roster.len())));
        }
        let roster = build_roster(&t.config.roster, &t.config.strategies);
        let summary = run_tournament::<std::convert::Infallible, _>(&roster, &t.config.tournament_settings(), |_| Ok(()))
            .map_err(|e| Failure(DpsimStatus::RunError, e.to_string()))?;
        out.copy_from_slice(&summary.final_score);
        Ok(())
    })
}

/// Run the tournament writing traces, manifest and report under `out_dir`.
///
/// # Safety
/// `t` must be a live handle and `out_dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn dpsim_tournament_execute(t: *const DpsimTournament, out_dir: *const c_char) -> DpsimStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| Failure::null("tournament"))?;
        let dir = str_arg(out_dir, "out_dir")?;
        let config = RunConfig { out: PathBuf::from(dir), ..t.config.clone() };
        execute(&config).map_err(|e| Failure(DpsimStatus::RunError, e.to_string()))?;
        Ok(())
    })
}
