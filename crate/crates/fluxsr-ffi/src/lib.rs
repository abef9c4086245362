//! C interface to the fluxsr toolkit.
//!
//! Conventions: every constructor writes an opaque handle through an out
//! pointer and returns a status code; `_free` functions accept null; all
//! other functions take the handle plus out pointers. On any non-zero
//! status the thread-local error message is set and readable through
//! [`fluxsr_last_error`]. Panics are caught at the boundary and reported
//! as `Numerical`, never unwound into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fluxsr::circuit::{extract_qubit_params, FluxBias, JunctionSet, QubitParams};
use fluxsr::config::{SpinTemplate, DEFAULT_DECAY_WINDOW_SR, MHZ_TO_RAD_NS};
use fluxsr::dynamics::model::{sr_time, superradiant_rate};
use fluxsr::dynamics::sector::{DecayOptions, SectorEngine, SectorState};
use fluxsr::dynamics::SpinModel;
use fluxsr::ensemble::{build_ensemble, ensemble_std, optimal_flux, EnsembleSample, SamplingConfig};
use fluxsr::experiments::{decay_step, decay_window, draw_omegas};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FluxsrStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments failed validation; see `fluxsr_last_error`.
    InvalidArgument = 2,
    /// The computation failed or panicked; see `fluxsr_last_error`.
    Numerical = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL stripped above");
    });
}

fn fail(status: FluxsrStatus, msg: &str) -> FluxsrStatus {
    set_error(msg);
    status
}

/// Run `body` with panics converted into a `Numerical` status.
fn guarded(body: impl FnOnce() -> FluxsrStatus) -> FluxsrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".to_string());
            fail(FluxsrStatus::Numerical, &format!("internal panic: {msg}"))
        }
    }
}

/// Copy the last error message (NUL-terminated) into `buf`; returns the
/// full length including the terminator. With `cap` of zero or a null
/// `buf`, nothing is copied, so calling once with (NULL, 0) sizes the
/// buffer. Messages are per thread.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static version string (NUL-terminated, never freed).
#[no_mangle]
pub extern "C" fn fluxsr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// Single qubit

/// One characterized device: junction parameters plus the extracted
/// two-level reduction.
pub struct FluxsrQubit {
    params: QubitParams,
}

/// Characterize one device. `basis_cutoff` of 12 reproduces the production
/// numbers; smaller is faster and less accurate.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_qubit_new(
    alpha: f64,
    beta1: f64,
    beta2: f64,
    ej_ghz: f64,
    ej_over_ec: f64,
    basis_cutoff: usize,
    out: *mut *mut FluxsrQubit,
) -> FluxsrStatus {
    if out.is_null() {
        return fail(FluxsrStatus::NullArgument, "out handle pointer is null");
    }
    guarded(|| {
        let junctions = match JunctionSet::new(alpha, beta1, beta2, ej_ghz, ej_over_ec) {
            Ok(j) => j,
            Err(e) => return fail(FluxsrStatus::InvalidArgument, &e.to_string()),
        };
        match extract_qubit_params(&junctions, basis_cutoff) {
            Ok(params) => {
                *out = Box::into_raw(Box::new(FluxsrQubit { params }));
                FluxsrStatus::Ok
            }
            Err(e) => fail(FluxsrStatus::Numerical, &e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fluxsr_qubit_free(qubit: *mut FluxsrQubit) {
    if !qubit.is_null() {
        drop(Box::from_raw(qubit));
    }
}

unsafe fn read_qubit<'a>(
    qubit: *const FluxsrQubit,
    out: *const f64,
) -> Result<&'a FluxsrQubit, FluxsrStatus> {
    if qubit.is_null() || out.is_null() {
        return Err(fail(FluxsrStatus::NullArgument, "qubit handle or out pointer is null"));
    }
    Ok(&*qubit)
}

/// Tunnel splitting at the symmetry point, GHz.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_qubit_delta_ghz(
    qubit: *const FluxsrQubit,
    out: *mut f64,
) -> FluxsrStatus {
    match read_qubit(qubit, out) {
        Ok(q) => {
            *out = q.params.delta_ghz;
            FluxsrStatus::Ok
        }
        Err(s) => s,
    }
}

/// Persistent current, amperes.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_qubit_ip_amperes(
    qubit: *const FluxsrQubit,
    out: *mut f64,
) -> FluxsrStatus {
    match read_qubit(qubit, out) {
        Ok(q) => {
            *out = q.params.ip_amperes();
            FluxsrStatus::Ok
        }
        Err(s) => s,
    }
}

/// Root-mean-square misfit of the two-level form, GHz.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_qubit_fit_rms_ghz(
    qubit: *const FluxsrQubit,
    out: *mut f64,
) -> FluxsrStatus {
    match read_qubit(qubit, out) {
        Ok(q) => {
            *out = q.params.fit_rms_ghz;
            FluxsrStatus::Ok
        }
        Err(s) => s,
    }
}

/// Transition frequency at external flux `flux` (units of the flux
/// quantum), GHz.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_qubit_frequency_ghz(
    qubit: *const FluxsrQubit,
    flux: f64,
    out: *mut f64,
) -> FluxsrStatus {
    match read_qubit(qubit, out) {
        Ok(q) => {
            if !flux.is_finite() {
                return fail(FluxsrStatus::InvalidArgument, "flux must be finite");
            }
            *out = q.params.frequency_ghz(FluxBias(flux));
            FluxsrStatus::Ok
        }
        Err(s) => s,
    }
}

// ---------------------------------------------------------------------------
// Fabricated ensemble

/// A sampled ensemble of characterized devices.
pub struct FluxsrEnsemble {
    sample: EnsembleSample,
}

/// Sample and characterize `n_qubits` devices with a common relative spread
/// `sigma` on all three junction parameters.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_ensemble_new(
    sigma: f64,
    mean_alpha: f64,
    n_qubits: usize,
    seed: u64,
    ej_ghz: f64,
    ej_over_ec: f64,
    basis_cutoff: usize,
    out: *mut *mut FluxsrEnsemble,
) -> FluxsrStatus {
    if out.is_null() {
        return fail(FluxsrStatus::NullArgument, "out handle pointer is null");
    }
    guarded(|| {
        let cfg = SamplingConfig {
            mean_alpha,
            sigma_s: sigma,
            sigma_l1: sigma,
            sigma_l2: sigma,
            n_qubits,
            seed,
            ej_ghz,
            ej_over_ec,
        };
        match build_ensemble(&cfg, basis_cutoff) {
            Ok(sample) => {
                *out = Box::into_raw(Box::new(FluxsrEnsemble { sample }));
                FluxsrStatus::Ok
            }
            Err(e) => fail(FluxsrStatus::InvalidArgument, &e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fluxsr_ensemble_free(ensemble: *mut FluxsrEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Number of devices in the ensemble.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_ensemble_len(
    ensemble: *const FluxsrEnsemble,
    out: *mut usize,
) -> FluxsrStatus {
    if ensemble.is_null() || out.is_null() {
        return fail(FluxsrStatus::NullArgument, "ensemble handle or out pointer is null");
    }
    *out = (*ensemble).sample.qubits.len();
    FluxsrStatus::Ok
}

/// Tunnel splitting and persistent current of device `index`.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_ensemble_qubit(
    ensemble: *const FluxsrEnsemble,
    index: usize,
    out_delta_ghz: *mut f64,
    out_ip_amperes: *mut f64,
) -> FluxsrStatus {
    if ensemble.is_null() || out_delta_ghz.is_null() || out_ip_amperes.is_null() {
        return fail(FluxsrStatus::NullArgument, "ensemble handle or out pointer is null");
    }
    let sample = &(*ensemble).sample;
    match sample.qubits.get(index) {
        Some(q) => {
            *out_delta_ghz = q.delta_ghz;
            *out_ip_amperes = q.ip_amperes();
            FluxsrStatus::Ok
        }
        None => fail(
            FluxsrStatus::InvalidArgument,
            &format!("index {index} out of range for {} devices", sample.qubits.len()),
        ),
    }
}

/// Standard deviation of the ensemble transition frequencies at `flux`, GHz.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_ensemble_std_ghz(
    ensemble: *const FluxsrEnsemble,
    flux: f64,
    out: *mut f64,
) -> FluxsrStatus {
    if ensemble.is_null() || out.is_null() {
        return fail(FluxsrStatus::NullArgument, "ensemble handle or out pointer is null");
    }
    guarded(|| match ensemble_std(&(*ensemble).sample, FluxBias(flux)) {
        Ok(std) => {
            *out = std;
            FluxsrStatus::Ok
        }
        Err(e) => fail(FluxsrStatus::InvalidArgument, &e.to_string()),
    })
}

/// External flux minimizing the frequency spread over `[flux_min,
/// flux_max]` (grid scan plus golden-section refinement), and the spread
/// there.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_ensemble_optimal_flux(
    ensemble: *const FluxsrEnsemble,
    flux_min: f64,
    flux_max: f64,
    grid: usize,
    out_flux: *mut f64,
    out_std_ghz: *mut f64,
) -> FluxsrStatus {
    if ensemble.is_null() || out_flux.is_null() || out_std_ghz.is_null() {
        return fail(FluxsrStatus::NullArgument, "ensemble handle or out pointer is null");
    }
    guarded(|| match optimal_flux(&(*ensemble).sample, (flux_min, flux_max), grid) {
        Ok((f, std)) => {
            *out_flux = f.0;
            *out_std_ghz = std;
            FluxsrStatus::Ok
        }
        Err(e) => fail(FluxsrStatus::InvalidArgument, &e.to_string()),
    })
}

// ---------------------------------------------------------------------------
// Collective decay

/// A frequency-broadened ensemble coupled to one lossy cavity, reduced to
/// the collective-decay description.
pub struct FluxsrDecay {
    model: SpinModel,
    engine: SectorEngine,
}

/// Build the collective-decay system. Frequencies in MHz; qubit
/// frequencies are drawn once from a normal distribution of width
/// `delta_omega_mhz` around `omega_bar_mhz` (realization 0 of `seed`).
#[no_mangle]
pub unsafe extern "C" fn fluxsr_decay_new(
    n_qubits: usize,
    omega_bar_mhz: f64,
    delta_omega_mhz: f64,
    cavity_detuning_mhz: f64,
    g_mhz: f64,
    kappa_mhz: f64,
    seed: u64,
    out: *mut *mut FluxsrDecay,
) -> FluxsrStatus {
    if out.is_null() {
        return fail(FluxsrStatus::NullArgument, "out handle pointer is null");
    }
    guarded(|| {
        let template = SpinTemplate {
            n: n_qubits,
            omega_bar: omega_bar_mhz * MHZ_TO_RAD_NS,
            delta_omega: delta_omega_mhz * MHZ_TO_RAD_NS,
            omega_c: (omega_bar_mhz + cavity_detuning_mhz) * MHZ_TO_RAD_NS,
            g: g_mhz * MHZ_TO_RAD_NS,
            kappa: kappa_mhz * MHZ_TO_RAD_NS,
        };
        if n_qubits == 0 {
            return fail(FluxsrStatus::InvalidArgument, "n_qubits must be at least 1");
        }
        let model = match template.realize(draw_omegas(&template, seed, 0)) {
            Ok(m) => m,
            Err(e) => return fail(FluxsrStatus::InvalidArgument, &e.to_string()),
        };
        match SectorEngine::new(&model) {
            Ok(engine) => {
                *out = Box::into_raw(Box::new(FluxsrDecay { model, engine }));
                FluxsrStatus::Ok
            }
            Err(e) => fail(FluxsrStatus::InvalidArgument, &e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fluxsr_decay_free(decay: *mut FluxsrDecay) {
    if !decay.is_null() {
        drop(Box::from_raw(decay));
    }
}

/// Per-qubit emission rate through the cavity, `kappa g^2 / (kappa^2 +
/// chi^2)` in rad/ns, where chi is the cavity detuning from the ensemble
/// mean.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_decay_rate(
    decay: *const FluxsrDecay,
    out: *mut f64,
) -> FluxsrStatus {
    if decay.is_null() || out.is_null() {
        return fail(FluxsrStatus::NullArgument, "decay handle or out pointer is null");
    }
    *out = superradiant_rate(&(*decay).model);
    FluxsrStatus::Ok
}

/// Superradiance time for `m` initial excitations, ns.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_decay_sr_time_ns(
    decay: *const FluxsrDecay,
    m: usize,
    out: *mut f64,
) -> FluxsrStatus {
    if decay.is_null() || out.is_null() {
        return fail(FluxsrStatus::NullArgument, "decay handle or out pointer is null");
    }
    if m == 0 {
        return fail(FluxsrStatus::InvalidArgument, "m must be at least 1");
    }
    *out = sr_time(&(*decay).model, m as f64);
    FluxsrStatus::Ok
}

/// Decay `m` initially excited qubits and report the peak of <J+J-> and
/// the time it occurred. `step_divisor` of 8 or more reproduces the peak
/// to better than a part in a thousand.
#[no_mangle]
pub unsafe extern "C" fn fluxsr_decay_peak(
    decay: *const FluxsrDecay,
    m: usize,
    step_divisor: f64,
    out_max_jpjm: *mut f64,
    out_t_ns: *mut f64,
) -> FluxsrStatus {
    if decay.is_null() || out_max_jpjm.is_null() || out_t_ns.is_null() {
        return fail(FluxsrStatus::NullArgument, "decay handle or out pointer is null");
    }
    guarded(|| {
        let handle = &*decay;
        let n = handle.model.n_qubits();
        if m == 0 || m > n {
            return fail(
                FluxsrStatus::InvalidArgument,
                &format!("m = {m} outside 1..={n} excitations"),
            );
        }
        if !(step_divisor.is_finite() && step_divisor > 0.0) {
            return fail(FluxsrStatus::InvalidArgument, "step_divisor must be positive");
        }
        let state0 = SectorState::from_excited_mask(n, (1usize << m) - 1);
        let mut opts = DecayOptions::with_step(decay_step(&handle.model, step_divisor));
        opts.early_exit = true;
        let window = decay_window(&handle.model, DEFAULT_DECAY_WINDOW_SR);
        match handle.engine.evolve_decay(&state0, window, 40, &opts) {
            Ok(run) => {
                *out_max_jpjm = run.max_jpjm;
                *out_t_ns = run.t_at_max;
                FluxsrStatus::Ok
            }
            Err(e) => fail(FluxsrStatus::Numerical, &e.to_string()),
        }
    })
}
