//! Plain-text pulse sequences.
//!
//! ```text
//! # spin echo at resonance
//! model f0=195 delta=25 convention=sum
//! initial state=+2
//! pulse angle=pi/2 f=195 phase=0
//! delay T=145 phi=0
//! pulse angle=pi f=195 phase=0
//! delay T=145 phi=0
//! pulse angle=pi/2 f=195 phase=0
//! ```
//!
//! `model` and `initial` are optional (defaults: `delta=25`, `convention=sum`,
//! `state=+2`; `f0` has no default). A pulse without `f` runs at `f0`; a delay
//! without `f` takes the RF frequency of the closest preceding pulse, or of
//! the first pulse if none precedes it.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fit::DEFAULT_DELTA_KHZ;
use crate::ramsey::{DelaySpec, DetuningModel, PhaseConvention, PulseSpec, SequenceSpec, Step};
use crate::spin2::{SpinState, Sublevel};

/// Parses a number or a multiple of pi: `1.5`, `pi`, `-pi/2`, `3pi/4`, `0.5*pi`.
pub fn parse_angle(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (sign, t) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t),
    };
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n, d.trim().parse::<f64>().ok().filter(|d| *d != 0.0)?),
        None => (t, 1.0),
    };
    let coef = num.trim().strip_suffix("pi")?.trim_end_matches('*').trim();
    let coef = if coef.is_empty() {
        1.0
    } else {
        coef.parse::<f64>().ok()?
    };
    let v = sign * coef * PI / den;
    v.is_finite().then_some(v)
}

struct Line<'a> {
    number: usize,
    keyword: &'a str,
    args: BTreeMap<&'a str, &'a str>,
}

fn split_line(number: usize, text: &str) -> Result<Option<Line<'_>>> {
    let text = text.split('#').next().unwrap_or("").trim();
    if text.is_empty() {
        return Ok(None);
    }
    let mut words = text.split_whitespace();
    let keyword = words.next().unwrap_or_default();
    let mut args = BTreeMap::new();
    for w in words {
        let (k, v) = w.split_once('=').ok_or_else(|| Error::Parse {
            line: number,
            message: format!("expected key=value, got {w:?}"),
        })?;
        if args.insert(k, v).is_some() {
            return Err(Error::Parse {
                line: number,
                message: format!("duplicate key {k:?}"),
            });
        }
    }
    Ok(Some(Line {
        number,
        keyword,
        args,
    }))
}

enum PendingStep {
    Pulse {
        angle: f64,
        f: Option<f64>,
        phase: f64,
    },
    Delay {
        t: f64,
        phi: f64,
        f: Option<f64>,
    },
}

/// Parses a sequence file. Step numbers in errors are 1-based.
pub fn parse_sequence(text: &str) -> Result<SequenceSpec> {
    let mut f0: Option<f64> = None;
    let mut delta = DEFAULT_DELTA_KHZ;
    let mut convention = PhaseConvention::Sum;
    let mut initial = SpinState::stretched();
    let mut seen_model = false;
    let mut seen_initial = false;
    let mut pending: Vec<(usize, PendingStep)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let Some(line) = split_line(i + 1, raw)? else {
            continue;
        };
        let step = pending.len() + 1;
        let header_err = |message: String| Error::Parse {
            line: line.number,
            message,
        };
        let step_err = |message: String| Error::SequenceParse {
            step,
            line: line.number,
            message,
        };
        match line.keyword {
            "model" => {
                if seen_model {
                    return Err(header_err("duplicate model line".into()));
                }
                seen_model = true;
                for (k, v) in &line.args {
                    match *k {
                        "f0" => {
                            f0 = Some(number(v).ok_or_else(|| header_err(format!("bad f0 {v:?}")))?)
                        }
                        "delta" => {
                            delta =
                                number(v).ok_or_else(|| header_err(format!("bad delta {v:?}")))?
                        }
                        "convention" => {
                            convention = match *v {
                                "sum" => PhaseConvention::Sum,
                                "difference" => PhaseConvention::Difference,
                                _ => return Err(header_err(format!("unknown convention {v:?}"))),
                            }
                        }
                        _ => return Err(header_err(format!("unknown model key {k:?}"))),
                    }
                }
            }
            "initial" => {
                if seen_initial {
                    return Err(header_err("duplicate initial line".into()));
                }
                seen_initial = true;
                for (k, v) in &line.args {
                    match *k {
                        "state" => {
                            initial = SpinState::basis(
                                v.parse::<Sublevel>()
                                    .map_err(|e| header_err(e.to_string()))?,
                            )
                        }
                        _ => return Err(header_err(format!("unknown initial key {k:?}"))),
                    }
                }
            }
            "pulse" => {
                let mut angle = None;
                let mut f = None;
                let mut phase = 0.0;
                for (k, v) in &line.args {
                    let parsed = parse_angle(v);
                    match *k {
                        "angle" => {
                            angle =
                                Some(parsed.ok_or_else(|| step_err(format!("bad angle {v:?}")))?)
                        }
                        "f" => f = Some(number(v).ok_or_else(|| step_err(format!("bad f {v:?}")))?),
                        "phase" => {
                            phase = parsed.ok_or_else(|| step_err(format!("bad phase {v:?}")))?
                        }
                        _ => return Err(step_err(format!("unknown pulse key {k:?}"))),
                    }
                }
                let angle = angle.ok_or_else(|| step_err("pulse needs angle=<rad>".into()))?;
                pending.push((line.number, PendingStep::Pulse { angle, f, phase }));
            }
            "delay" => {
                let mut t = None;
                let mut phi = 0.0;
                let mut f = None;
                for (k, v) in &line.args {
                    match *k {
                        "T" => t = Some(number(v).ok_or_else(|| step_err(format!("bad T {v:?}")))?),
                        "phi" => {
                            phi =
                                parse_angle(v).ok_or_else(|| step_err(format!("bad phi {v:?}")))?
                        }
                        "f" => f = Some(number(v).ok_or_else(|| step_err(format!("bad f {v:?}")))?),
                        _ => return Err(step_err(format!("unknown delay key {k:?}"))),
                    }
                }
                let t = t.ok_or_else(|| step_err("delay needs T=<us>".into()))?;
                if t < 0.0 {
                    return Err(step_err(format!("negative delay T={t}")));
                }
                pending.push((line.number, PendingStep::Delay { t, phi, f }));
            }
            other => return Err(header_err(format!("unknown directive {other:?}"))),
        }
    }

    let f0 = f0.ok_or_else(|| Error::Parse {
        line: 0,
        message: "missing `model f0=<khz>` line".into(),
    })?;
    let detuning = DetuningModel::new(f0, delta).map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    if pending.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "sequence has no steps".into(),
        });
    }

    let pulse_f = |p: &PendingStep| match p {
        PendingStep::Pulse { f, .. } => Some(f.unwrap_or(f0)),
        PendingStep::Delay { .. } => None,
    };
    let first_pulse_f = pending.iter().find_map(|(_, p)| pulse_f(p)).unwrap_or(f0);
    let mut last_pulse_f: Option<f64> = None;
    let steps = pending
        .iter()
        .map(|(_, p)| match *p {
            PendingStep::Pulse { angle, f, phase } => {
                let f = f.unwrap_or(f0);
                last_pulse_f = Some(f);
                Step::Pulse(PulseSpec {
                    nominal_angle: angle,
                    rf_frequency_khz: f,
                    axis_phase: phase,
                })
            }
            PendingStep::Delay { t, phi, f } => Step::Delay(DelaySpec {
                duration_us: t,
                free_phase: phi,
                rf_frequency_khz: f.or(last_pulse_f).unwrap_or(first_pulse_f),
            }),
        })
        .collect();
    Ok(SequenceSpec {
        detuning,
        convention,
        steps,
        initial,
    })
}

fn number(v: &str) -> Option<f64> {
    v.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}
