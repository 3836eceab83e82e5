//! CSV, SVG and JSON output. Numbers are written with 17 significant digits.

use std::io::Write;

use num_complex::Complex;
use serde::Serialize;

use crate::cbes::ComplexProcessPath;
use crate::error::Result;
use crate::field::{FieldGrid, HittingSurface};
use crate::scalar::Real;
use crate::sle::Trace;
use crate::solver::FlowSolution;

struct Csv<W> {
    out: W,
}

impl<W: Write> Csv<W> {
    fn new(mut out: W, header: &str) -> Result<Self> {
        out.write_all(header.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(Csv { out })
    }

    fn row<T: Real>(&mut self, fields: &[T]) -> Result<()> {
        for (i, v) in fields.iter().enumerate() {
            if i > 0 {
                self.out.write_all(b",")?;
            }
            write!(self.out, "{:.16e}", v.as_f64())?;
        }
        self.out.write_all(b"\n")?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// `t,u,v,logderiv`
pub fn write_solution_csv<T: Real, W: Write>(out: W, sol: &FlowSolution<T>) -> Result<()> {
    let mut csv = Csv::new(out, "t,u,v,logderiv")?;
    for i in 0..sol.len() {
        csv.row(&[sol.times[i], sol.h[i].re, sol.h[i].im, sol.log_deriv[i]])?;
    }
    csv.finish()
}

/// `t,re_y,im_y,re_h,im_h`
pub fn write_process_csv<T: Real, W: Write>(out: W, path: &ComplexProcessPath<T>) -> Result<()> {
    let mut csv = Csv::new(out, "t,re_y,im_y,re_h,im_h")?;
    for i in 0..path.times.len() {
        csv.row(&[path.times[i], path.y[i].re, path.y[i].im, path.h[i].re, path.h[i].im])?;
    }
    csv.finish()
}

/// `seed,t,re_y,im_y,re_h,im_h`, paths one after another.
pub fn write_process_batch_csv<T: Real, W: Write>(mut out: W, paths: &[(u64, ComplexProcessPath<T>)]) -> Result<()> {
    writeln!(out, "seed,t,re_y,im_y,re_h,im_h")?;
    for (seed, path) in paths {
        for i in 0..path.times.len() {
            write!(out, "{seed}")?;
            for v in [path.times[i], path.y[i].re, path.y[i].im, path.h[i].re, path.h[i].im] {
                write!(out, ",{:.16e}", v.as_f64())?;
            }
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `s,t,x,re,im`
pub fn write_field_csv<T: Real, W: Write>(out: W, grid: &FieldGrid<T>) -> Result<()> {
    let mut csv = Csv::new(out, "s,t,x,re,im")?;
    for (s, t, x, v) in grid.entries() {
        csv.row(&[s, t, x, v.re, v.im])?;
    }
    csv.finish()
}

/// `s,x,T`
pub fn write_hitting_surface_csv<T: Real, W: Write>(out: W, surface: &HittingSurface<T>) -> Result<()> {
    let mut csv = Csv::new(out, "s,x,T")?;
    for row in &surface.records {
        for r in row {
            csv.row(&[r.s, r.x, r.hit_time])?;
        }
    }
    csv.finish()
}

/// `seed,T`, one hitting time per seed.
pub fn write_hitting_samples_csv<T: Real, W: Write>(mut out: W, samples: &[(u64, T)]) -> Result<()> {
    writeln!(out, "seed,T")?;
    for (seed, t) in samples {
        writeln!(out, "{seed},{:.16e}", t.as_f64())?;
    }
    out.flush()?;
    Ok(())
}

/// `t,re,im`
pub fn write_trace_csv<T: Real, W: Write>(out: W, trace: &Trace<T>) -> Result<()> {
    let mut csv = Csv::new(out, "t,re,im")?;
    for (t, g) in trace.times.iter().zip(&trace.gamma) {
        csv.row(&[*t, g.re, g.im])?;
    }
    csv.finish()
}

/// A single polyline of the trace in the window `[−2, 2] × [0, 2]`, upper half plane up.
pub fn write_trace_svg<T: Real, W: Write>(mut out: W, trace: &Trace<T>) -> Result<()> {
    let points: Vec<String> =
        trace.gamma.iter().map(|g: &Complex<T>| format!("{:.6},{:.6}", g.re.as_f64(), 2.0 - g.im.as_f64())).collect();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="-2 0 4 2" width="800" height="400">"#)?;
    writeln!(out, r#"<line x1="-2" y1="2" x2="2" y2="2" stroke="gray" stroke-width="0.005"/>"#)?;
    writeln!(out, r#"<polyline fill="none" stroke="black" stroke-width="0.004" points="{}"/>"#, points.join(" "))?;
    writeln!(out, "</svg>")?;
    out.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize, W: Write>(mut out: W, value: &S) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| crate::error::Error::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
