use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use tiff::decoder::{Decoder, DecodingResult};
use tiff::tags::Tag;

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Single-band north-up grid. Cell `(row, col)` covers the half-open box
/// `[x_ll + col·dx, x_ll + (col+1)·dx) × [y_top - (row+1)·dy, y_top - row·dy)`
/// so every point inside the extent belongs to exactly one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub ncols: usize,
    pub nrows: usize,
    /// Lower-left corner of the grid.
    pub x_ll: f64,
    pub y_ll: f64,
    pub cell_x: f64,
    pub cell_y: f64,
    pub nodata: Option<f64>,
    pub crs: String,
    /// Row-major values, first row is the northernmost.
    pub values: Vec<f64>,
}

impl Raster {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ncols: usize,
        nrows: usize,
        x_ll: f64,
        y_ll: f64,
        cell: f64,
        values: Vec<f64>,
        nodata: Option<f64>,
        crs: impl Into<String>,
    ) -> Result<Self> {
        let r = Raster {
            ncols,
            nrows,
            x_ll,
            y_ll,
            cell_x: cell,
            cell_y: cell,
            nodata,
            crs: crs.into(),
            values,
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::validation("raster has no cells"));
        }
        if !(self.cell_x > 0.0 && self.cell_y > 0.0) {
            return Err(Error::validation("raster cell size must be positive"));
        }
        if !(self.x_ll.is_finite() && self.y_ll.is_finite()) {
            return Err(Error::validation("raster origin must be finite"));
        }
        if self.values.len() != self.ncols * self.nrows {
            return Err(Error::validation(format!(
                "raster has {} values, expected {}",
                self.values.len(),
                self.ncols * self.nrows
            )));
        }
        Ok(())
    }

    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let cx = ((p.x - self.x_ll) / self.cell_x).floor();
        let cy = ((p.y - self.y_ll) / self.cell_y).floor();
        if !(cx >= 0.0 && cy >= 0.0) || cx >= self.ncols as f64 || cy >= self.nrows as f64 {
            return None;
        }
        let col = cx as usize;
        let row = self.nrows - 1 - cy as usize;
        Some((row, col))
    }

    /// Value of the cell containing `p`; `None` outside the extent, on
    /// nodata cells, or on NaN cells.
    pub fn value_at(&self, p: Point) -> Option<f64> {
        let (row, col) = self.cell_of(p)?;
        let v = self.values[row * self.ncols + col];
        if v.is_nan() || self.nodata == Some(v) {
            None
        } else {
            Some(v)
        }
    }

    /// Read an ESRI ASCII grid. `nodata` overrides the header value.
    pub fn read_ascii(path: &Path, nodata: Option<f64>, crs: &str) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(f);
        let bad = |msg: String| Error::validation(format!("{}: {msg}", path.display()));
        let mut header: Vec<(String, f64)> = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let first = trimmed.split_whitespace().next().unwrap();
            if values.is_empty() && first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                let mut it = trimmed.split_whitespace();
                let key = it.next().unwrap().to_ascii_lowercase();
                let val = it
                    .next()
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| bad(format!("line {}: bad header `{trimmed}`", lineno + 1)))?;
                header.push((key, val));
                continue;
            }
            for tok in trimmed.split_whitespace() {
                values.push(
                    tok.parse::<f64>()
                        .map_err(|_| bad(format!("line {}: bad value `{tok}`", lineno + 1)))?,
                );
            }
        }
        let get = |k: &str| header.iter().find(|(key, _)| key == k).map(|(_, v)| *v);
        let ncols = get("ncols").ok_or_else(|| bad("missing ncols".into()))? as usize;
        let nrows = get("nrows").ok_or_else(|| bad("missing nrows".into()))? as usize;
        let cell = get("cellsize").ok_or_else(|| bad("missing cellsize".into()))?;
        let (x_ll, y_ll) = match (get("xllcorner").or(get("xll")), get("yllcorner").or(get("yll"))) {
            (Some(x), Some(y)) => (x, y),
            _ => match (get("xllcenter"), get("yllcenter")) {
                (Some(x), Some(y)) => (x - cell / 2.0, y - cell / 2.0),
                _ => return Err(bad("missing lower-left corner".into())),
            },
        };
        let nodata = nodata.or(get("nodata_value")).or(get("nodata"));
        Raster::new(ncols, nrows, x_ll, y_ll, cell, values, nodata, crs)
            .map_err(|e| bad(e.to_string()))
    }

    pub fn write_ascii(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("ncols {}\n", self.ncols));
        out.push_str(&format!("nrows {}\n", self.nrows));
        out.push_str(&format!("xllcorner {}\n", self.x_ll));
        out.push_str(&format!("yllcorner {}\n", self.y_ll));
        out.push_str(&format!("cellsize {}\n", self.cell_x));
        if let Some(nd) = self.nodata {
            out.push_str(&format!("nodata_value {nd}\n"));
        }
        for row in self.values.chunks(self.ncols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Write a single-band 64-bit float GeoTIFF with pixel-scale, tie-point
    /// and (if set) GDAL nodata tags.
    pub fn write_geotiff(&self, path: &Path) -> Result<()> {
        use tiff::encoder::{colortype::Gray64Float, TiffEncoder};
        let bad = |e: tiff::TiffError| Error::validation(format!("{}: {e}", path.display()));
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = TiffEncoder::new(f).map_err(bad)?;
        let mut img = enc
            .new_image::<Gray64Float>(self.ncols as u32, self.nrows as u32)
            .map_err(bad)?;
        let y_top = self.y_ll + self.nrows as f64 * self.cell_y;
        img.encoder()
            .write_tag(Tag::ModelPixelScaleTag, &[self.cell_x, self.cell_y, 0.0][..])
            .map_err(bad)?;
        img.encoder()
            .write_tag(Tag::ModelTiepointTag, &[0.0, 0.0, 0.0, self.x_ll, y_top, 0.0][..])
            .map_err(bad)?;
        if let Some(nd) = self.nodata {
            img.encoder().write_tag(Tag::GdalNodata, &nd.to_string()[..]).map_err(bad)?;
        }
        img.write_data(&self.values).map_err(bad)
    }

    /// Read a single-band GeoTIFF using its pixel-scale and tie-point tags.
    /// `nodata` overrides the GDAL nodata tag.
    pub fn read_geotiff(path: &Path, nodata: Option<f64>, crs: &str) -> Result<Self> {
        let bad = |msg: String| Error::validation(format!("{}: {msg}", path.display()));
        let tiff_err = |e: tiff::TiffError| bad(e.to_string());
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut dec = Decoder::new(BufReader::new(f)).map_err(tiff_err)?;
        let (w, h) = dec.dimensions().map_err(tiff_err)?;
        let scale = dec
            .get_tag_f64_vec(Tag::ModelPixelScaleTag)
            .map_err(|_| bad("missing ModelPixelScale tag".into()))?;
        let tie = dec
            .get_tag_f64_vec(Tag::ModelTiepointTag)
            .map_err(|_| bad("missing ModelTiepoint tag".into()))?;
        if scale.len() < 2 || tie.len() < 6 {
            return Err(bad("malformed georeferencing tags".into()));
        }
        let header_nodata = dec
            .get_tag_ascii_string(Tag::GdalNodata)
            .ok()
            .and_then(|s| s.trim_matches(char::from(0)).trim().parse::<f64>().ok());
        let values: Vec<f64> = match dec.read_image().map_err(tiff_err)? {
            DecodingResult::U8(v) => v.into_iter().map(f64::from).collect(),
            DecodingResult::U16(v) => v.into_iter().map(f64::from).collect(),
            DecodingResult::U32(v) => v.into_iter().map(f64::from).collect(),
            DecodingResult::U64(v) => v.into_iter().map(|x| x as f64).collect(),
            DecodingResult::I8(v) => v.into_iter().map(f64::from).collect(),
            DecodingResult::I16(v) => v.into_iter().map(f64::from).collect(),
            DecodingResult::I32(v) => v.into_iter().map(f64::from).collect(),
            DecodingResult::I64(v) => v.into_iter().map(|x| x as f64).collect(),
            DecodingResult::F32(v) => v.into_iter().map(f64::from).collect(),
            DecodingResult::F64(v) => v,
        };
        let (ncols, nrows) = (w as usize, h as usize);
        if values.len() != ncols * nrows {
            return Err(bad("only single-band rasters are supported".into()));
        }
        let (sx, sy) = (scale[0], scale[1]);
        let x_left = tie[3] - tie[0] * sx;
        let y_top = tie[4] + tie[1] * sy;
        let mut r = Raster::new(
            ncols,
            nrows,
            x_left,
            y_top - nrows as f64 * sy,
            sx,
            values,
            nodata.or(header_nodata),
            crs,
        )
        .map_err(|e| bad(e.to_string()))?;
        r.cell_y = sy;
        r.validate().map_err(|e| bad(e.to_string()))?;
        Ok(r)
    }

    /// Dispatch on file extension (`.tif`/`.tiff` vs ASCII grid).
    pub fn read(path: &Path, nodata: Option<f64>, crs: &str) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "tif" || ext == "tiff" => Self::read_geotiff(path, nodata, crs),
            _ => Self::read_ascii(path, nodata, crs),
        }
    }
}

/// Sample the cell containing `point`, after checking that the point's CRS
/// matches the raster's.
pub fn sample_raster(raster: &Raster, point: Point, point_crs: &str) -> Result<Option<f64>> {
    if raster.crs != point_crs {
        return Err(Error::validation(format!(
            "projection mismatch: raster is {} but point is {point_crs}",
            raster.crs
        )));
    }
    Ok(raster.value_at(point))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CRS: &str = "EPSG:5070";

    // 2×2 grid over [0,20)×[0,20):
    //   row 0 (north): 1 2
    //   row 1 (south): 3 4
    fn two_by_two() -> Raster {
        Raster::new(2, 2, 0.0, 0.0, 10.0, vec![1.0, 2.0, 3.0, 4.0], Some(-9999.0), CRS).unwrap()
    }

    /// Edge-ownership oracle: the owning cell is the one whose half-open
    /// box `[x0, x0+dx) × [y0, y0+dy)` contains the point.
    fn oracle(p: Point) -> Option<f64> {
        let cells = [
            (0.0, 10.0, 1.0),
            (10.0, 10.0, 2.0),
            (0.0, 0.0, 3.0),
            (10.0, 0.0, 4.0),
        ];
        cells
            .iter()
            .find(|(x0, y0, _)| p.x >= *x0 && p.x < x0 + 10.0 && p.y >= *y0 && p.y < y0 + 10.0)
            .map(|c| c.2)
    }

    #[test]
    fn interior_outside_and_edges() {
        let r = two_by_two();
        assert_eq!(sample_raster(&r, Point::new(5.0, 15.0), CRS).unwrap(), Some(1.0));
        assert_eq!(sample_raster(&r, Point::new(-1.0, 5.0), CRS).unwrap(), None);
        assert_eq!(sample_raster(&r, Point::new(20.0, 5.0), CRS).unwrap(), None);
        assert_eq!(sample_raster(&r, Point::new(5.0, 20.0), CRS).unwrap(), None);
        let mut probes = Vec::new();
        for x in [0.0, 5.0, 10.0, 15.0, 20.0] {
            for y in [0.0, 5.0, 10.0, 15.0, 20.0] {
                probes.push(Point::new(x, y));
            }
        }
        for p in probes {
            assert_eq!(r.value_at(p), oracle(p), "{p:?}");
        }
        // shared corner belongs to the north-east cell's lower-left corner
        assert_eq!(r.value_at(Point::new(10.0, 10.0)), Some(2.0));
    }

    #[test]
    fn nodata_and_crs_mismatch() {
        let mut r = two_by_two();
        r.values[0] = -9999.0;
        assert_eq!(r.value_at(Point::new(5.0, 15.0)), None);
        assert!(sample_raster(&r, Point::new(5.0, 5.0), "EPSG:4326").is_err());
    }

    #[test]
    fn ascii_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.asc");
        let r = two_by_two();
        r.write_ascii(&p).unwrap();
        let back = Raster::read_ascii(&p, None, CRS).unwrap();
        assert_eq!(back, r);
        let over = Raster::read_ascii(&p, Some(4.0), CRS).unwrap();
        assert_eq!(over.value_at(Point::new(15.0, 5.0)), None);
    }

    #[test]
    fn ascii_rejects_short_data() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.asc");
        std::fs::write(&p, "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n").unwrap();
        assert!(Raster::read_ascii(&p, None, CRS).is_err());
    }

    #[test]
    fn geotiff_georeferencing() {
        use tiff::encoder::{colortype::Gray64Float, TiffEncoder};
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.tif");
        {
            let f = File::create(&p).unwrap();
            let mut enc = TiffEncoder::new(f).unwrap();
            let mut img = enc.new_image::<Gray64Float>(2, 2).unwrap();
            img.encoder()
                .write_tag(Tag::ModelPixelScaleTag, &[10.0f64, 10.0, 0.0][..])
                .unwrap();
            img.encoder()
                .write_tag(Tag::ModelTiepointTag, &[0.0f64, 0.0, 0.0, 100.0, 220.0, 0.0][..])
                .unwrap();
            img.write_data(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        }
        let r = Raster::read_geotiff(&p, Some(3.0), CRS).unwrap();
        assert_eq!((r.x_ll, r.y_ll), (100.0, 200.0));
        assert_eq!(r.value_at(Point::new(101.0, 219.0)), Some(1.0));
        assert_eq!(r.value_at(Point::new(115.0, 205.0)), Some(4.0));
        assert_eq!(r.value_at(Point::new(105.0, 205.0)), None);
        assert_eq!(Raster::read(&p, None, CRS).unwrap().values, vec![1.0, 2.0, 3.0, 4.0]);

        let q = dir.path().join("w.tif");
        let mut src = r.clone();
        src.nodata = Some(-9999.0);
        src.write_geotiff(&q).unwrap();
        assert_eq!(Raster::read(&q, None, CRS).unwrap(), src);
    }
}
