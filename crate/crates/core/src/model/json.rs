//! The `.brep.json` exchange format.
//!
//! ```json
//! {
//!   "name": "plate",
//!   "surfaces": [{"kind": "plane", "origin": [0,0,0], "x_axis": [1,0,0], "y_axis": [0,1,0],
//!                 "params": {}, "u_range": [0,1], "v_range": [0,1]}],
//!   "curves":   [{"kind": "line", "origin": [0,0,0], "x_axis": [1,0,0], "t_range": [0,1]}],
//!   "faces":    [{"surface": 0, "same_sense": true, "loops": [[[0,0],[1,0],[1,1],[0,1]]]}],
//!   "edges":    [{"curve": 0, "t_range": [0,1], "faces": [0,0]}]
//! }
//! ```
//!
//! Defaults: `origin` zero, `x_axis` +X, `y_axis` a unit vector perpendicular
//! to `x_axis`, `same_sense` true, `loops` the surface's natural rectangle,
//! edge `t_range` the curve's interval, face/edge `type` the code of the
//! underlying kind. The serializer always writes every field.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    validate, BezierPatch, BrepModel, Curve, CurveKind, Face, Frame, IssueKind, Surface,
    SurfaceKind, TopoEdge, Vec3,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: unknown {entity} kind `{kind}`")]
    UnknownKind {
        path: String,
        entity: &'static str,
        kind: String,
    },
    #[error("{path}: {message}")]
    InvalidField { path: String, message: String },
    #[error("{path}: dangling index: {message}")]
    DanglingIndex { path: String, message: String },
    #[error("{path}: {message}")]
    Invariant { path: String, message: String },
}

impl ParseError {
    /// Entity path for semantic errors, `None` for errors located by line/column.
    pub fn path(&self) -> Option<&str> {
        match self {
            ParseError::Syntax { .. } | ParseError::Schema { .. } => None,
            ParseError::UnknownKind { path, .. }
            | ParseError::InvalidField { path, .. }
            | ParseError::DanglingIndex { path, .. }
            | ParseError::Invariant { path, .. } => Some(path),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    #[serde(default)]
    name: String,
    #[serde(default)]
    surfaces: Vec<RawSurface>,
    #[serde(default)]
    curves: Vec<RawCurve>,
    #[serde(default)]
    faces: Vec<RawFace>,
    #[serde(default)]
    edges: Vec<RawEdge>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSurface {
    kind: String,
    #[serde(default)]
    origin: [f64; 3],
    #[serde(default)]
    x_axis: Option<[f64; 3]>,
    #[serde(default)]
    y_axis: Option<[f64; 3]>,
    #[serde(default)]
    params: Map<String, Value>,
    u_range: [f64; 2],
    v_range: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurve {
    kind: String,
    #[serde(default)]
    origin: [f64; 3],
    #[serde(default)]
    x_axis: Option<[f64; 3]>,
    #[serde(default)]
    y_axis: Option<[f64; 3]>,
    #[serde(default)]
    params: Map<String, Value>,
    t_range: [f64; 2],
}

fn default_true() -> bool {
    true
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFace {
    surface: usize,
    #[serde(default = "default_true")]
    same_sense: bool,
    #[serde(default)]
    loops: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, rename = "type")]
    type_code: Option<i32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    curve: usize,
    #[serde(default)]
    t_range: Option<[f64; 2]>,
    faces: [usize; 2],
    #[serde(default, rename = "type")]
    type_code: Option<i32>,
}

/// Parse a document and reject it unless every model invariant holds.
pub fn parse_brep(document: &str) -> Result<BrepModel, ParseError> {
    let model = parse_unchecked(document)?;
    let report = validate(&model);
    let mut errors = report.errors();
    let first_dangling = errors.clone().find(|i| i.kind == IssueKind::DanglingIndex);
    if let Some(issue) = first_dangling {
        return Err(ParseError::DanglingIndex {
            path: issue.entity.clone(),
            message: issue.message.clone(),
        });
    }
    if let Some(issue) = errors.next() {
        return Err(ParseError::Invariant {
            path: issue.entity.clone(),
            message: issue.message.clone(),
        });
    }
    Ok(model)
}

/// Structural parse only: syntax, field types, kinds and parameters. Cross
/// references and geometric invariants are left to [`validate`].
pub fn parse_unchecked(document: &str) -> Result<BrepModel, ParseError> {
    let raw: RawDocument = serde_json::from_str(document).map_err(|e| {
        let (line, column, message) = (e.line(), e.column(), e.to_string());
        match e.classify() {
            serde_json::error::Category::Data => ParseError::Schema {
                line,
                column,
                message,
            },
            _ => ParseError::Syntax {
                line,
                column,
                message,
            },
        }
    })?;

    let surfaces = raw
        .surfaces
        .iter()
        .enumerate()
        .map(|(i, s)| surface_from_raw(s, &format!("surfaces[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let curves = raw
        .curves
        .iter()
        .enumerate()
        .map(|(i, c)| curve_from_raw(c, &format!("curves[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;

    let faces = raw
        .faces
        .into_iter()
        .map(|f| {
            let surface = surfaces.get(f.surface);
            let loops = f.loops.unwrap_or_else(|| {
                surface
                    .map(|s| {
                        let r = s.natural_rect();
                        vec![vec![
                            [r.u_min, r.v_min],
                            [r.u_max, r.v_min],
                            [r.u_max, r.v_max],
                            [r.u_min, r.v_max],
                        ]]
                    })
                    .unwrap_or_default()
            });
            let type_code = f
                .type_code
                .or_else(|| surface.map(|s| s.kind.type_code()))
                .unwrap_or(-1);
            Face {
                surface: f.surface,
                same_sense: f.same_sense,
                loops,
                type_code,
            }
        })
        .collect();

    let edges = raw
        .edges
        .into_iter()
        .map(|e| {
            let curve = curves.get(e.curve);
            TopoEdge {
                curve: e.curve,
                t_range: e
                    .t_range
                    .or_else(|| curve.map(|c| c.t_range))
                    .unwrap_or([0.0, 0.0]),
                faces: e.faces,
                type_code: e
                    .type_code
                    .or_else(|| curve.map(|c| c.kind.type_code()))
                    .unwrap_or(-1),
            }
        })
        .collect();

    Ok(BrepModel {
        name: raw.name,
        surfaces,
        curves,
        faces,
        edges,
    })
}

/// Serialize with every field explicit; `parse_unchecked(to_json(m)) == m`.
pub fn to_json(model: &BrepModel) -> String {
    let raw = RawDocument {
        name: model.name.clone(),
        surfaces: model.surfaces.iter().map(surface_to_raw).collect(),
        curves: model.curves.iter().map(curve_to_raw).collect(),
        faces: model
            .faces
            .iter()
            .map(|f| RawFace {
                surface: f.surface,
                same_sense: f.same_sense,
                loops: Some(f.loops.clone()),
                type_code: Some(f.type_code),
            })
            .collect(),
        edges: model
            .edges
            .iter()
            .map(|e| RawEdge {
                curve: e.curve,
                t_range: Some(e.t_range),
                faces: e.faces,
                type_code: Some(e.type_code),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("model serializes to JSON")
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn arr3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Unit vector perpendicular to `x`, built from the world axis least aligned with it.
fn default_y_axis(x: &Vec3) -> Vec3 {
    let n = x.norm();
    if n == 0.0 || !n.is_finite() {
        return Vec3::y();
    }
    let x = x / n;
    let helper = if x.x.abs() <= x.y.abs() && x.x.abs() <= x.z.abs() {
        Vec3::x()
    } else if x.y.abs() <= x.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let y = helper - x * helper.dot(&x);
    y / y.norm()
}

fn frame_from_raw(origin: [f64; 3], x: Option<[f64; 3]>, y: Option<[f64; 3]>) -> Frame {
    let x_axis = x.map(vec3).unwrap_or_else(Vec3::x);
    let y_axis = match y {
        Some(y) => vec3(y),
        None if x.is_none() => Vec3::y(),
        None => default_y_axis(&x_axis),
    };
    Frame::new(vec3(origin), x_axis, y_axis)
}

struct Params<'a> {
    map: &'a Map<String, Value>,
    path: &'a str,
    allowed: &'static [&'static str],
}

impl<'a> Params<'a> {
    fn new(
        map: &'a Map<String, Value>,
        path: &'a str,
        allowed: &'static [&'static str],
    ) -> Result<Self, ParseError> {
        if let Some(extra) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(ParseError::InvalidField {
                path: format!("{path}.params.{extra}"),
                message: format!("unexpected parameter (expected one of {allowed:?})"),
            });
        }
        Ok(Self { map, path, allowed })
    }

    fn get(&self, key: &'static str) -> Result<&'a Value, ParseError> {
        debug_assert!(self.allowed.contains(&key));
        self.map.get(key).ok_or_else(|| ParseError::InvalidField {
            path: format!("{}.params.{key}", self.path),
            message: "missing required parameter".into(),
        })
    }

    fn invalid(&self, key: &str, message: &str) -> ParseError {
        ParseError::InvalidField {
            path: format!("{}.params.{key}", self.path),
            message: message.into(),
        }
    }

    fn number(&self, key: &'static str) -> Result<f64, ParseError> {
        self.get(key)?
            .as_f64()
            .ok_or_else(|| self.invalid(key, "expected a number"))
    }

    fn count(&self, key: &'static str) -> Result<usize, ParseError> {
        self.get(key)?
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| self.invalid(key, "expected a non-negative integer"))
    }

    fn points(&self, key: &'static str) -> Result<Vec<Vec3>, ParseError> {
        let arr = self
            .get(key)?
            .as_array()
            .ok_or_else(|| self.invalid(key, "expected an array of [x,y,z] points"))?;
        arr.iter()
            .enumerate()
            .map(|(i, p)| {
                let coords = p
                    .as_array()
                    .filter(|c| c.len() == 3)
                    .and_then(|c| c.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
                    .ok_or_else(|| {
                        self.invalid(&format!("{key}[{i}]"), "expected [x, y, z] numbers")
                    })?;
                Ok(Vec3::new(coords[0], coords[1], coords[2]))
            })
            .collect()
    }
}

fn surface_from_raw(raw: &RawSurface, path: &str) -> Result<Surface, ParseError> {
    let p = |allowed| Params::new(&raw.params, path, allowed);
    let kind = match raw.kind.as_str() {
        "plane" => {
            p(&[])?;
            SurfaceKind::Plane
        }
        "cylinder" => SurfaceKind::Cylinder {
            radius: p(&["radius"])?.number("radius")?,
        },
        "cone" => {
            let p = p(&["radius", "half_angle"])?;
            SurfaceKind::Cone {
                radius: p.number("radius")?,
                half_angle: p.number("half_angle")?,
            }
        }
        "sphere" => SurfaceKind::Sphere {
            radius: p(&["radius"])?.number("radius")?,
        },
        "torus" => {
            let p = p(&["major_radius", "minor_radius"])?;
            SurfaceKind::Torus {
                major_radius: p.number("major_radius")?,
                minor_radius: p.number("minor_radius")?,
            }
        }
        "bezier_patch" => {
            let p = p(&["degree_u", "degree_v", "control_points"])?;
            SurfaceKind::BezierPatch(BezierPatch {
                degree_u: p.count("degree_u")?,
                degree_v: p.count("degree_v")?,
                control_points: p.points("control_points")?,
            })
        }
        other => {
            return Err(ParseError::UnknownKind {
                path: format!("{path}.kind"),
                entity: "surface",
                kind: other.to_string(),
            })
        }
    };
    Ok(Surface {
        kind,
        frame: frame_from_raw(raw.origin, raw.x_axis, raw.y_axis),
        u_range: raw.u_range,
        v_range: raw.v_range,
    })
}

fn curve_from_raw(raw: &RawCurve, path: &str) -> Result<Curve, ParseError> {
    let p = |allowed| Params::new(&raw.params, path, allowed);
    let kind = match raw.kind.as_str() {
        "line" => {
            p(&[])?;
            CurveKind::Line
        }
        "circle_arc" => CurveKind::CircleArc {
            radius: p(&["radius"])?.number("radius")?,
        },
        "ellipse_arc" => {
            let p = p(&["semi_major", "semi_minor"])?;
            CurveKind::EllipseArc {
                semi_major: p.number("semi_major")?,
                semi_minor: p.number("semi_minor")?,
            }
        }
        "bezier" => CurveKind::Bezier {
            control_points: p(&["control_points"])?.points("control_points")?,
        },
        other => {
            return Err(ParseError::UnknownKind {
                path: format!("{path}.kind"),
                entity: "curve",
                kind: other.to_string(),
            })
        }
    };
    Ok(Curve {
        kind,
        frame: frame_from_raw(raw.origin, raw.x_axis, raw.y_axis),
        t_range: raw.t_range,
    })
}

fn points_value(points: &[Vec3]) -> Value {
    Value::Array(
        points
            .iter()
            .map(|p| serde_json::json!([p.x, p.y, p.z]))
            .collect(),
    )
}

fn surface_to_raw(s: &Surface) -> RawSurface {
    let mut params = Map::new();
    match &s.kind {
        SurfaceKind::Plane => {}
        SurfaceKind::Cylinder { radius } | SurfaceKind::Sphere { radius } => {
            params.insert("radius".into(), (*radius).into());
        }
        SurfaceKind::Cone { radius, half_angle } => {
            params.insert("radius".into(), (*radius).into());
            params.insert("half_angle".into(), (*half_angle).into());
        }
        SurfaceKind::Torus {
            major_radius,
            minor_radius,
        } => {
            params.insert("major_radius".into(), (*major_radius).into());
            params.insert("minor_radius".into(), (*minor_radius).into());
        }
        SurfaceKind::BezierPatch(patch) => {
            params.insert("degree_u".into(), patch.degree_u.into());
            params.insert("degree_v".into(), patch.degree_v.into());
            params.insert("control_points".into(), points_value(&patch.control_points));
        }
    }
    RawSurface {
        kind: s.kind.name().into(),
        origin: arr3(&s.frame.origin),
        x_axis: Some(arr3(&s.frame.x_axis)),
        y_axis: Some(arr3(&s.frame.y_axis)),
        params,
        u_range: s.u_range,
        v_range: s.v_range,
    }
}

fn curve_to_raw(c: &Curve) -> RawCurve {
    let mut params = Map::new();
    match &c.kind {
        CurveKind::Line => {}
        CurveKind::CircleArc { radius } => {
            params.insert("radius".into(), (*radius).into());
        }
        CurveKind::EllipseArc {
            semi_major,
            semi_minor,
        } => {
            params.insert("semi_major".into(), (*semi_major).into());
            params.insert("semi_minor".into(), (*semi_minor).into());
        }
        CurveKind::Bezier { control_points } => {
            params.insert("control_points".into(), points_value(control_points));
        }
    }
    RawCurve {
        kind: c.kind.name().into(),
        origin: arr3(&c.frame.origin),
        x_axis: Some(arr3(&c.frame.x_axis)),
        y_axis: Some(arr3(&c.frame.y_axis)),
        params,
        t_range: c.t_range,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    const CUBE: &str = include_str!("../../fixtures/cube.brep.json");
    const CYLINDER: &str = include_str!("../../fixtures/cylinder.brep.json");

    #[test]
    fn cube_document_has_cube_topology() {
        let m = parse_brep(CUBE).unwrap();
        assert_eq!(m.faces.len(), 6);
        assert_eq!(m.edges.len(), 12);
    }

    #[test]
    fn cylinder_circles_join_side_and_caps() {
        let m = parse_brep(CYLINDER).unwrap();
        assert_eq!(m.faces.len(), 3);
        let circles: Vec<_> = m
            .edges
            .iter()
            .filter(|e| matches!(m.curves[e.curve].kind, CurveKind::CircleArc { .. }))
            .collect();
        assert_eq!(circles.len(), 2);
        let side = m
            .faces
            .iter()
            .position(|f| matches!(m.surfaces[f.surface].kind, SurfaceKind::Cylinder { .. }))
            .unwrap();
        for e in circles {
            assert!(e.faces.contains(&side));
            let other = if e.faces[0] == side { e.faces[1] } else { e.faces[0] };
            assert_ne!(other, side);
            assert_eq!(m.surfaces[m.faces[other].surface].kind, SurfaceKind::Plane);
        }
    }

    #[test]
    fn dangling_face_index_names_the_edge_field() {
        let mut doc: Value = serde_json::from_str(CUBE).unwrap();
        doc["edges"][3]["faces"][1] = 99.into();
        let err = parse_brep(&doc.to_string()).unwrap_err();
        match err {
            ParseError::DanglingIndex { path, .. } => {
                assert_eq!(path, "edges[3].incident_faces")
            }
            other => panic!("expected dangling index error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = parse_brep("{\n  \"name\": \"x\",\n  \"faces\": [ }").unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_field_type_is_a_schema_error() {
        let err = parse_brep(r#"{"faces": [{"surface": "zero"}]}"#).unwrap_err();
        assert!(matches!(err, ParseError::Schema { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn unknown_surface_kind_is_rejected() {
        let doc = r#"{"surfaces": [{"kind": "nurbs", "u_range": [0,1], "v_range": [0,1]}]}"#;
        let err = parse_brep(doc).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownKind {
                path: "surfaces[0].kind".into(),
                entity: "surface",
                kind: "nurbs".into()
            }
        );
    }

    #[test]
    fn missing_and_unexpected_params_are_rejected() {
        let missing = r#"{"surfaces": [{"kind": "cylinder", "u_range": [0,1], "v_range": [0,1]}]}"#;
        assert_eq!(
            parse_brep(missing).unwrap_err().path(),
            Some("surfaces[0].params.radius")
        );
        let extra = r#"{"curves": [{"kind": "line", "params": {"radius": 1}, "t_range": [0,1]}]}"#;
        assert_eq!(
            parse_brep(extra).unwrap_err().path(),
            Some("curves[0].params.radius")
        );
    }

    #[test]
    fn empty_model_fails_invariants() {
        let err = parse_brep(r#"{"name": "empty"}"#).unwrap_err();
        assert!(matches!(err, ParseError::Invariant { .. }), "{err:?}");
    }

    #[test]
    fn defaults_fill_omitted_fields() {
        let doc = r#"{
            "surfaces": [{"kind": "plane", "u_range": [0, 2], "v_range": [0, 1]}],
            "curves": [{"kind": "line", "x_axis": [0, 0, 1], "t_range": [0, 1]}],
            "faces": [{"surface": 0}],
            "edges": [{"curve": 0, "faces": [0, 0]}]
        }"#;
        let m = parse_brep(doc).unwrap();
        assert!(m.faces[0].same_sense);
        assert_eq!(m.faces[0].loops[0], vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]);
        assert_eq!(m.faces[0].type_code, 0);
        assert_eq!(m.edges[0].t_range, [0.0, 1.0]);
        assert!(m.curves[0].frame.orthonormality_error() < 1e-12);
    }

    #[test]
    fn reference_models_round_trip_exactly() {
        for m in [
            synth::unit_cube(),
            synth::closed_cylinder(1.5, 2.0),
            synth::annular_plate(),
            synth::unit_sphere(),
            synth::torus(2.0, 0.5),
            synth::bezier_sheet(),
        ] {
            let text = to_json(&m);
            assert_eq!(parse_brep(&text).unwrap(), m, "{}", m.name);
            assert_eq!(to_json(&parse_brep(&text).unwrap()), text);
        }
    }
}
