//! Minimal GeoJSON reading and writing over `serde_json::Value`.
//!
//! Only `Point`, `LineString` and `Polygon` geometries are supported.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(Point),
    LineString(Vec<Point>),
    Polygon(Polygon),
}

#[derive(Debug, Clone)]
pub struct Feature {
    pub id: Option<String>,
    pub geometry: Geometry,
    pub properties: Map<String, Value>,
}

impl Feature {
    pub fn prop_str(&self, key: &str) -> Option<String> {
        match self.properties.get(key)? {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    }

    pub fn prop_f64(&self, key: &str) -> Option<f64> {
        match self.properties.get(key)? {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    }

    /// Identifier from the `id` property, falling back to the feature id.
    pub fn identifier(&self) -> Option<String> {
        self.prop_str("id").or_else(|| self.id.clone())
    }
}

#[derive(Debug, Clone, Default)]
pub struct FeatureCollection {
    pub crs: Option<String>,
    pub features: Vec<Feature>,
}

fn coord(v: &Value) -> Option<Point> {
    let a = v.as_array()?;
    Some(Point::new(a.first()?.as_f64()?, a.get(1)?.as_f64()?))
}

fn coords(v: &Value) -> Option<Vec<Point>> {
    v.as_array()?.iter().map(coord).collect()
}

fn parse_geometry(v: &Value) -> Result<Geometry> {
    let kind = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::validation("geometry without type"))?;
    let c = v
        .get("coordinates")
        .ok_or_else(|| Error::validation("geometry without coordinates"))?;
    let bad = || Error::validation(format!("malformed {kind} coordinates"));
    match kind {
        "Point" => Ok(Geometry::Point(coord(c).ok_or_else(bad)?)),
        "LineString" => Ok(Geometry::LineString(coords(c).ok_or_else(bad)?)),
        "Polygon" => {
            let rings: Vec<Vec<Point>> = c
                .as_array()
                .ok_or_else(bad)?
                .iter()
                .map(coords)
                .collect::<Option<_>>()
                .ok_or_else(bad)?;
            let mut it = rings.into_iter();
            let ext = it.next().ok_or_else(bad)?;
            Ok(Geometry::Polygon(Polygon::new(ext, it.collect())?))
        }
        other => Err(Error::validation(format!(
            "unsupported geometry type `{other}`"
        ))),
    }
}

impl FeatureCollection {
    pub fn from_value(v: &Value) -> Result<Self> {
        let crs = v
            .pointer("/crs/properties/name")
            .and_then(Value::as_str)
            .map(str::to_string);
        let features = v
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::validation("expected a FeatureCollection"))?;
        let mut out = Vec::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            let geometry = f
                .get("geometry")
                .ok_or_else(|| Error::validation(format!("feature {i}: missing geometry")))
                .and_then(parse_geometry)
                .map_err(|e| Error::validation(format!("feature {i}: {e}")))?;
            let id = match f.get("id") {
                Some(Value::String(s)) => Some(s.clone()),
                Some(Value::Number(n)) => Some(n.to_string()),
                _ => None,
            };
            let properties = f
                .get("properties")
                .and_then(Value::as_object)
                .cloned()
                .unwrap_or_default();
            out.push(Feature {
                id,
                geometry,
                properties,
            });
        }
        Ok(Self {
            crs,
            features: out,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::from_value(&v).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }

    pub fn to_value(&self) -> Value {
        let features: Vec<Value> = self
            .features
            .iter()
            .map(|f| {
                let mut obj = Map::new();
                obj.insert("type".into(), json!("Feature"));
                if let Some(id) = &f.id {
                    obj.insert("id".into(), json!(id));
                }
                obj.insert("geometry".into(), geometry_value(&f.geometry));
                obj.insert("properties".into(), Value::Object(f.properties.clone()));
                Value::Object(obj)
            })
            .collect();
        let mut root = Map::new();
        root.insert("type".into(), json!("FeatureCollection"));
        if let Some(crs) = &self.crs {
            root.insert(
                "crs".into(),
                json!({"type": "name", "properties": {"name": crs}}),
            );
        }
        root.insert("features".into(), Value::Array(features));
        Value::Object(root)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_value()).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn pt(p: &Point) -> Value {
    json!([p.x, p.y])
}

fn ring(r: &[Point]) -> Value {
    let mut v: Vec<Value> = r.iter().map(pt).collect();
    if let Some(first) = r.first() {
        v.push(pt(first));
    }
    Value::Array(v)
}

pub fn geometry_value(g: &Geometry) -> Value {
    match g {
        Geometry::Point(p) => json!({"type": "Point", "coordinates": pt(p)}),
        Geometry::LineString(ps) => {
            json!({"type": "LineString", "coordinates": ps.iter().map(pt).collect::<Vec<_>>()})
        }
        Geometry::Polygon(poly) => {
            json!({"type": "Polygon", "coordinates": poly.rings().map(ring).collect::<Vec<_>>()})
        }
    }
}
