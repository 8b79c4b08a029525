use std::f64::consts::FRAC_PI_2;
use std::fmt;

use super::{BrepModel, Curve, CurveKind, Face, Frame, Surface, SurfaceKind, Uv, UvRect};

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    DanglingIndex,
    Invariant,
    SeamEdge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub kind: IssueKind,
    /// Entity path such as `surfaces[2]` or `edges[5].incident_faces`.
    pub entity: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} {}: {}", self.entity, self.message)
    }
}

/// Every violation found in a model. Warnings (seam edges) do not make a
/// model invalid; [`ValidationReport::is_valid`] looks at errors only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &ValidationIssue> + Clone {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ValidationIssue> + Clone {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Warning)
    }

    fn error(&mut self, kind: IssueKind, entity: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            severity: Severity::Error,
            kind,
            entity: entity.into(),
            message: message.into(),
        });
    }

    fn invariant(&mut self, entity: impl Into<String>, message: impl Into<String>) {
        self.error(IssueKind::Invariant, entity, message);
    }
}

/// Check every model invariant. Never fails; violations are returned as data.
pub fn validate(model: &BrepModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    if model.faces.is_empty() {
        report.invariant("faces", "model has no faces");
    }
    for (i, s) in model.surfaces.iter().enumerate() {
        check_surface(&mut report, &format!("surfaces[{i}]"), s);
    }
    for (i, c) in model.curves.iter().enumerate() {
        check_curve(&mut report, &format!("curves[{i}]"), c);
    }
    for (i, f) in model.faces.iter().enumerate() {
        check_face(&mut report, model, &format!("faces[{i}]"), f);
    }
    for (k, e) in model.edges.iter().enumerate() {
        let path = format!("edges[{k}]");
        match model.curves.get(e.curve) {
            None => report.error(
                IssueKind::DanglingIndex,
                format!("{path}.curve"),
                format!("curve {} does not exist ({} curves)", e.curve, model.curves.len()),
            ),
            Some(c) => {
                if e.type_code != c.kind.type_code() {
                    report.invariant(
                        format!("{path}.type"),
                        format!(
                            "edge type {} does not match {} code {}",
                            e.type_code,
                            c.kind.name(),
                            c.kind.type_code()
                        ),
                    );
                }
                let [t0, t1] = e.t_range;
                if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
                    report.invariant(format!("{path}.t_range"), format!("empty interval [{t0}, {t1}]"));
                } else if t0 < c.t_range[0] - TOL || t1 > c.t_range[1] + TOL {
                    report.invariant(
                        format!("{path}.t_range"),
                        format!(
                            "[{t0}, {t1}] exceeds curve interval [{}, {}]",
                            c.t_range[0], c.t_range[1]
                        ),
                    );
                }
            }
        }
        let bad: Vec<_> = e
            .faces
            .iter()
            .filter(|&&f| f >= model.faces.len())
            .collect();
        if !bad.is_empty() {
            report.error(
                IssueKind::DanglingIndex,
                format!("{path}.incident_faces"),
                format!("face index {bad:?} does not exist ({} faces)", model.faces.len()),
            );
        } else if e.is_seam() {
            report.issues.push(ValidationIssue {
                severity: Severity::Warning,
                kind: IssueKind::SeamEdge,
                entity: format!("{path}.incident_faces"),
                message: format!("seam edge: both sides are face {}", e.faces[0]),
            });
        }
    }
    report
}

fn check_frame(report: &mut ValidationReport, path: &str, frame: &Frame) {
    let all = [frame.origin, frame.x_axis, frame.y_axis];
    if all.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
        report.invariant(format!("{path}.frame"), "non-finite frame component");
        return;
    }
    let err = frame.orthonormality_error();
    if err > TOL {
        report.invariant(
            format!("{path}.frame"),
            format!("axes not orthonormal (deviation {err:e})"),
        );
    }
}

fn check_range(report: &mut ValidationReport, path: String, r: [f64; 2]) {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
        report.invariant(path, format!("empty or non-finite range [{}, {}]", r[0], r[1]));
    }
}

fn positive(report: &mut ValidationReport, path: &str, name: &str, value: f64) {
    if !(value.is_finite() && value > 0.0) {
        report.invariant(path, format!("{name} must be positive, got {value}"));
    }
}

fn check_surface(report: &mut ValidationReport, path: &str, s: &Surface) {
    check_frame(report, path, &s.frame);
    check_range(report, format!("{path}.u_range"), s.u_range);
    check_range(report, format!("{path}.v_range"), s.v_range);
    match &s.kind {
        SurfaceKind::Plane => {}
        SurfaceKind::Cylinder { radius } => positive(report, path, "radius", *radius),
        SurfaceKind::Cone { radius, half_angle } => {
            positive(report, path, "radius", *radius);
            if !(*half_angle > 0.0 && *half_angle < FRAC_PI_2) {
                report.invariant(path, format!("cone half-angle {half_angle} outside (0, pi/2)"));
            } else {
                // Apex must stay outside the parameter range.
                let rho = |v: f64| radius + v * half_angle.sin();
                if rho(s.v_range[0]) <= 0.0 || rho(s.v_range[1]) <= 0.0 {
                    report.invariant(path, "cone apex lies inside the v range");
                }
            }
        }
        SurfaceKind::Sphere { radius } => {
            positive(report, path, "radius", *radius);
            if s.v_range[0] < -FRAC_PI_2 - TOL || s.v_range[1] > FRAC_PI_2 + TOL {
                report.invariant(
                    format!("{path}.v_range"),
                    "sphere latitude range exceeds [-pi/2, pi/2]",
                );
            }
        }
        SurfaceKind::Torus {
            major_radius,
            minor_radius,
        } => {
            positive(report, path, "major radius", *major_radius);
            positive(report, path, "minor radius", *minor_radius);
            if minor_radius >= major_radius {
                report.invariant(
                    path,
                    format!("torus minor radius {minor_radius} must be below major radius {major_radius}"),
                );
            }
        }
        SurfaceKind::BezierPatch(patch) => {
            if patch.degree_u == 0 || patch.degree_v == 0 {
                report.invariant(path, "bezier patch degrees must be at least 1");
            }
            if patch.control_points.len() != patch.expected_len() {
                report.invariant(
                    format!("{path}.params.control_points"),
                    format!(
                        "expected {} control points for degree ({}, {}), got {}",
                        patch.expected_len(),
                        patch.degree_u,
                        patch.degree_v,
                        patch.control_points.len()
                    ),
                );
            }
            if patch.control_points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
                report.invariant(format!("{path}.params.control_points"), "non-finite control point");
            }
        }
    }
}

fn check_curve(report: &mut ValidationReport, path: &str, c: &Curve) {
    check_frame(report, path, &c.frame);
    check_range(report, format!("{path}.t_range"), c.t_range);
    match &c.kind {
        CurveKind::Line => {}
        CurveKind::CircleArc { radius } => positive(report, path, "radius", *radius),
        CurveKind::EllipseArc {
            semi_major,
            semi_minor,
        } => {
            positive(report, path, "semi-major axis", *semi_major);
            positive(report, path, "semi-minor axis", *semi_minor);
        }
        CurveKind::Bezier { control_points } => {
            if control_points.len() < 2 {
                report.invariant(
                    format!("{path}.params.control_points"),
                    "bezier curve needs at least 2 control points",
                );
            }
            if control_points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
                report.invariant(format!("{path}.params.control_points"), "non-finite control point");
            }
        }
    }
}

/// Vertex count of a loop, not counting an explicit closing duplicate.
fn distinct_len(l: &[Uv]) -> usize {
    if l.len() > 1 && l.first() == l.last() {
        l.len() - 1
    } else {
        l.len()
    }
}

fn check_face(report: &mut ValidationReport, model: &BrepModel, path: &str, f: &Face) {
    let Some(surface) = model.surfaces.get(f.surface) else {
        report.error(
            IssueKind::DanglingIndex,
            format!("{path}.surface"),
            format!(
                "surface {} does not exist ({} surfaces)",
                f.surface,
                model.surfaces.len()
            ),
        );
        return;
    };
    if f.type_code != surface.kind.type_code() {
        report.invariant(
            format!("{path}.type"),
            format!(
                "face type {} does not match {} code {}",
                f.type_code,
                surface.kind.name(),
                surface.kind.type_code()
            ),
        );
    }
    if f.loops.is_empty() {
        report.invariant(format!("{path}.loops"), "face has no outer loop");
    }
    let rect = surface.natural_rect();
    for (li, l) in f.loops.iter().enumerate() {
        let lpath = format!("{path}.loops[{li}]");
        if l.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            report.invariant(lpath, "non-finite loop vertex");
            continue;
        }
        if distinct_len(l) < 3 {
            report.invariant(&lpath, format!("loop has {} vertices, need at least 3", distinct_len(l)));
        }
        let excursion = max_excursion(&rect, l);
        if excursion > TOL {
            report.invariant(
                lpath,
                format!("loop leaves the parameter rectangle by {excursion:e}"),
            );
        }
    }
    for a in 0..f.loops.len() {
        for b in a + 1..f.loops.len() {
            if loops_touch(&f.loops[a], &f.loops[b]) {
                report.invariant(
                    format!("{path}.loops"),
                    format!("loops {a} and {b} intersect"),
                );
            }
        }
    }
}

fn max_excursion(rect: &UvRect, l: &[Uv]) -> f64 {
    l.iter()
        .map(|&[u, v]| {
            let du = (rect.u_min - u).max(u - rect.u_max).max(0.0);
            let dv = (rect.v_min - v).max(v - rect.v_max).max(0.0);
            du.max(dv)
        })
        .fold(0.0, f64::max)
}

fn segments(l: &[Uv]) -> impl Iterator<Item = (Uv, Uv)> + '_ {
    (0..l.len()).map(move |i| (l[i], l[(i + 1) % l.len()]))
}

fn loops_touch(a: &[Uv], b: &[Uv]) -> bool {
    segments(a).any(|(p, q)| segments(b).any(|(r, s)| segment_distance(p, q, r, s) <= TOL))
}

fn cross(o: Uv, a: Uv, b: Uv) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

pub(crate) fn point_segment_distance(p: Uv, a: Uv, b: Uv) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (cx * cx + cy * cy).sqrt()
}

fn segment_distance(p: Uv, q: Uv, r: Uv, s: Uv) -> f64 {
    let d1 = cross(p, q, r);
    let d2 = cross(p, q, s);
    let d3 = cross(r, s, p);
    let d4 = cross(r, s, q);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return 0.0;
    }
    point_segment_distance(p, r, s)
        .min(point_segment_distance(q, r, s))
        .min(point_segment_distance(r, p, q))
        .min(point_segment_distance(s, p, q))
}
