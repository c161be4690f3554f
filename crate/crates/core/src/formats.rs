//! Line-oriented file formats: JSON lines for annotations, detections, training
//! pairs and patches, and the rescore results CSV.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::eval::{GroundTruth, ScoredBox};
use crate::geom::BBox;
use crate::rescore::Detection;

/// `[x, y, w, h]`; written as integers, read from any JSON numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxField(pub BBox);

impl Serialize for BoxField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0.x, self.0.y, self.0.w, self.0.h].serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoxField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = <[f64; 4]>::deserialize(d)?;
        BBox::from_xywh(v)
            .map(BoxField)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid box {v:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRecord {
    pub image_id: String,
    pub category: String,
    #[serde(rename = "box")]
    pub bbox: BoxField,
    #[serde(default)]
    pub difficult: bool,
}

impl From<&GroundTruth> for GtRecord {
    fn from(g: &GroundTruth) -> Self {
        GtRecord {
            image_id: g.image_id.clone(),
            category: g.category.clone(),
            bbox: BoxField(g.bbox),
            difficult: g.difficult,
        }
    }
}

impl From<GtRecord> for GroundTruth {
    fn from(r: GtRecord) -> Self {
        GroundTruth {
            image_id: r.image_id,
            category: r.category,
            bbox: r.bbox.0,
            difficult: r.difficult,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetRecord {
    pub image_id: String,
    pub category: String,
    #[serde(rename = "box")]
    pub bbox: BoxField,
    pub score: f64,
}

impl From<&Detection> for DetRecord {
    fn from(d: &Detection) -> Self {
        DetRecord {
            image_id: d.image_id.clone(),
            category: d.category.clone(),
            bbox: BoxField(d.bbox),
            score: d.base_score,
        }
    }
}

impl From<DetRecord> for Detection {
    fn from(r: DetRecord) -> Self {
        Detection::new(r.image_id, r.category, r.bbox.0, r.score)
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            msg: format!("line {}: {e}", n + 1),
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for it in items {
        let line = serde_json::to_string(&it).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    Ok(read_jsonl::<GtRecord>(path)?.into_iter().map(Into::into).collect())
}

pub fn write_ground_truth(path: &Path, gts: &[GroundTruth]) -> Result<()> {
    write_jsonl(path, gts.iter().map(GtRecord::from))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let recs = read_jsonl::<DetRecord>(path)?;
    for r in &recs {
        if !(0.0..=1.0).contains(&r.score) {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                msg: format!("score {} of {} outside [0, 1]", r.score, r.image_id),
            });
        }
    }
    Ok(recs.into_iter().map(Into::into).collect())
}

pub fn write_detections(path: &Path, dets: &[Detection]) -> Result<()> {
    write_jsonl(path, dets.iter().map(DetRecord::from))
}

pub const RESCORE_HEADER: &str =
    "image_id,category,x,y,w,h,base_score,revised_base,ciss_score,n_supporters,fallback_flag";

/// One row of the rescore CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RescoreRow {
    pub image_id: String,
    pub category: String,
    pub bbox: BBox,
    pub base_score: f64,
    pub revised_base: f64,
    pub ciss_score: f64,
    pub n_supporters: usize,
    pub fallback: bool,
}

impl RescoreRow {
    pub fn from_detection(d: &Detection) -> Self {
        let revised = d.revised.map_or(d.base_score, |e| e.value);
        RescoreRow {
            image_id: d.image_id.clone(),
            category: d.category.clone(),
            bbox: d.bbox,
            base_score: d.base_score,
            revised_base: revised,
            ciss_score: d.ciss.map_or(revised, |e| e.value),
            n_supporters: d.n_supporters,
            fallback: d.fallback,
        }
    }

    pub fn scored(&self, column: ScoreColumn) -> ScoredBox {
        ScoredBox {
            image_id: self.image_id.clone(),
            category: self.category.clone(),
            bbox: self.bbox,
            score: match column {
                ScoreColumn::Base => self.base_score,
                ScoreColumn::Revised => self.revised_base,
                ScoreColumn::Ciss => self.ciss_score,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreColumn {
    Base,
    Revised,
    Ciss,
}

impl ScoreColumn {
    pub const ALL: [ScoreColumn; 3] = [ScoreColumn::Base, ScoreColumn::Revised, ScoreColumn::Ciss];

    pub fn name(self) -> &'static str {
        match self {
            ScoreColumn::Base => "base_score",
            ScoreColumn::Revised => "revised_base",
            ScoreColumn::Ciss => "ciss_score",
        }
    }
}

/// Flat on-disk shape of [`RescoreRow`].
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    image_id: String,
    category: String,
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    base_score: f64,
    revised_base: f64,
    ciss_score: f64,
    n_supporters: usize,
    fallback_flag: u8,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::Malformed {
            path: path.to_path_buf(),
            msg: format!("{other:?}"),
        },
    }
}

pub fn write_rescore_csv(path: &Path, rows: &[RescoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    if rows.is_empty() {
        w.write_record(RESCORE_HEADER.split(',')).map_err(|e| csv_error(path, e))?;
    }
    for r in rows {
        w.serialize(CsvRow {
            image_id: r.image_id.clone(),
            category: r.category.clone(),
            x: r.bbox.x,
            y: r.bbox.y,
            w: r.bbox.w,
            h: r.bbox.h,
            base_score: r.base_score,
            revised_base: r.revised_base,
            ciss_score: r.ciss_score,
            n_supporters: r.n_supporters,
            fallback_flag: u8::from(r.fallback),
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rescore_csv(path: &Path) -> Result<Vec<RescoreRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rd.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().collect::<Vec<_>>().join(",") != RESCORE_HEADER {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            msg: "missing rescore header".into(),
        });
    }
    rd.deserialize::<CsvRow>()
        .map(|r| {
            let r = r.map_err(|e| csv_error(path, e))?;
            if r.fallback_flag > 1 {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    msg: format!("fallback flag {} is not 0 or 1", r.fallback_flag),
                });
            }
            Ok(RescoreRow {
                image_id: r.image_id,
                category: r.category,
                bbox: BBox {
                    x: r.x,
                    y: r.y,
                    w: r.w,
                    h: r.h,
                },
                base_score: r.base_score,
                revised_base: r.revised_base,
                ciss_score: r.ciss_score,
                n_supporters: r.n_supporters,
                fallback: r.fallback_flag == 1,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    use std::fs;

    #[test]
    fn gt_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.jsonl");
        let gts = vec![GroundTruth {
            image_id: "a".into(),
            category: "car".into(),
            bbox: BBox { x: 1, y: 2, w: 3, h: 4 },
            difficult: true,
        }];
        write_ground_truth(&p, &gts).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"box\":[1,2,3,4]"));
        assert_eq!(read_ground_truth(&p).unwrap(), gts);
    }

    #[test]
    fn float_boxes_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        fs::write(&p, "{\"image_id\":\"a\",\"category\":\"c\",\"box\":[1.0,2,3.0,4],\"score\":0.5}\n\n").unwrap();
        let d = read_detections(&p).unwrap();
        assert_eq!(d[0].bbox, BBox { x: 1, y: 2, w: 3, h: 4 });
        fs::write(&p, "{\"image_id\":\"a\",\"category\":\"c\",\"box\":[1,2,3,4],\"score\":1.5}\n").unwrap();
        assert!(matches!(read_detections(&p), Err(Error::Malformed { .. })));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rows = vec![RescoreRow {
            image_id: "img".into(),
            category: "car".into(),
            bbox: BBox { x: 0, y: 5, w: 20, h: 30 },
            base_score: 0.1 + 0.2,
            revised_base: 0.25,
            ciss_score: 1.0 / 3.0,
            n_supporters: 4,
            fallback: true,
        }];
        write_rescore_csv(&p, &rows).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with(RESCORE_HEADER));
        assert_eq!(read_rescore_csv(&p).unwrap(), rows);
        write_rescore_csv(&p, &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().trim(), RESCORE_HEADER);
        assert!(read_rescore_csv(&p).unwrap().is_empty());
    }
}
