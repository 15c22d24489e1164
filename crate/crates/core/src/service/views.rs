//! Response bodies computed from a scored snapshot, independent of HTTP.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::compare::{comparison_or_placeholder, Comparison};
use crate::model::{EcoGradeReport, EfficiencyBand, EpcAttribute, Factor, FactorScores, Listing, Provenance};
use crate::score::Scorer;
use crate::store::ScoredSnapshot;

pub const DEFAULT_PER_PAGE: usize = 20;
pub const MAX_PER_PAGE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchQuery {
    pub city: Option<String>,
    pub beds: Option<u8>,
    pub order: SortOrder,
    pub page: usize,
    pub per_page: usize,
}

impl Default for SearchQuery {
    fn default() -> Self {
        Self {
            city: None,
            beds: None,
            order: SortOrder::Desc,
            page: 1,
            per_page: DEFAULT_PER_PAGE,
        }
    }
}

impl SearchQuery {
    /// Parse query parameters. Unknown parameters are rejected so typos
    /// do not silently return unfiltered results.
    pub fn parse(params: &BTreeMap<String, String>) -> Result<SearchQuery, String> {
        let mut q = SearchQuery::default();
        for (k, v) in params {
            match k.as_str() {
                "city" => q.city = Some(v.clone()).filter(|c| !c.trim().is_empty()),
                "beds" => {
                    q.beds = Some(
                        v.parse()
                            .map_err(|_| format!("beds must be an integer 0-255, got {v:?}"))?,
                    )
                }
                "sort" if v == "ecograde" => {}
                "sort" => return Err(format!("unsupported sort {v:?}; only \"ecograde\" is available")),
                "order" => {
                    q.order = match v.as_str() {
                        "asc" => SortOrder::Asc,
                        "desc" => SortOrder::Desc,
                        _ => return Err(format!("order must be asc or desc, got {v:?}")),
                    }
                }
                "page" => {
                    q.page = v
                        .parse()
                        .ok()
                        .filter(|p| *p >= 1)
                        .ok_or_else(|| format!("page must be a positive integer, got {v:?}"))?
                }
                "per_page" => {
                    q.per_page = v
                        .parse()
                        .ok()
                        .filter(|p| (1..=MAX_PER_PAGE).contains(p))
                        .ok_or_else(|| format!("per_page must be 1-{MAX_PER_PAGE}, got {v:?}"))?
                }
                _ => return Err(format!("unknown query parameter {k:?}")),
            }
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListingSummary {
    pub id: String,
    pub city: String,
    pub postcode: String,
    pub bedrooms: Option<u8>,
    /// `None` when the listing could not be scored.
    pub overall: Option<f64>,
    pub leaves: Option<u8>,
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPage {
    pub items: Vec<ListingSummary>,
    pub page: usize,
    pub per_page: usize,
    pub total: usize,
    pub total_pages: usize,
}

fn summary(l: &Listing, r: Option<&EcoGradeReport>) -> ListingSummary {
    ListingSummary {
        id: l.id.clone(),
        city: l.city.clone(),
        postcode: l.postcode.clone(),
        bedrooms: l.bedrooms,
        overall: r.map(|r| r.overall),
        leaves: r.map(|r| r.leaves),
        provenance: r.map(|r| r.provenance),
    }
}

/// Filter, sort by overall score, and page. Unscored listings come last in
/// either order; ties go to the lower id.
pub fn search(snap: &ScoredSnapshot, q: &SearchQuery) -> SearchPage {
    let mut rows: Vec<(&Listing, Option<f64>)> = snap
        .store
        .listings
        .iter()
        .filter(|l| q.city.as_deref().is_none_or(|c| l.city.eq_ignore_ascii_case(c.trim())))
        .filter(|l| q.beds.is_none_or(|b| l.bedrooms == Some(b)))
        .map(|l| (l, snap.reports.get(&l.id).map(|r| r.overall)))
        .collect();
    rows.sort_by(|(la, a), (lb, b)| {
        let by_score = match (a, b) {
            (Some(a), Some(b)) => match q.order {
                SortOrder::Desc => b.total_cmp(a),
                SortOrder::Asc => a.total_cmp(b),
            },
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_score.then_with(|| la.id.cmp(&lb.id))
    });
    let total = rows.len();
    let items = rows
        .into_iter()
        .skip((q.page - 1).saturating_mul(q.per_page))
        .take(q.per_page)
        .map(|(l, _)| summary(l, snap.reports.get(&l.id)))
        .collect();
    SearchPage {
        items,
        page: q.page,
        per_page: q.per_page,
        total,
        total_pages: total.div_ceil(q.per_page),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListingDetail {
    pub listing: Listing,
    pub report: Option<EcoGradeReport>,
    /// Why `report` is absent.
    pub unscored_reason: Option<String>,
    pub comparison: Comparison,
}

pub fn listing_detail(snap: &ScoredSnapshot, id: &str) -> Option<ListingDetail> {
    let listing = snap.store.listing(id)?;
    let report = snap.reports.get(id);
    Some(ListingDetail {
        listing: listing.clone(),
        report: report.cloned(),
        unscored_reason: snap
            .diagnostics
            .iter()
            .find(|d| d.listing_id == id)
            .map(|d| d.reason.clone()),
        comparison: comparison_for(snap, listing, report),
    })
}

fn comparison_for(snap: &ScoredSnapshot, listing: &Listing, report: Option<&EcoGradeReport>) -> Comparison {
    let baseline = snap
        .bed_types
        .get(&listing.id)
        .and_then(|b| snap.baseline(&listing.city, *b));
    comparison_or_placeholder(report.and_then(|r| r.co2_sample.as_ref()), baseline)
}

/// Suggested works per attribute. Generic wording modeled on certificate
/// recommendations.
pub fn advice_text(a: EpcAttribute) -> &'static str {
    match a {
        EpcAttribute::HotWater => "Insulate the hot water cylinder and fit a cylinder thermostat",
        EpcAttribute::Floor => "Insulate the floor, for example between suspended timber joists",
        EpcAttribute::Windows => "Replace single glazing with double or secondary glazing",
        EpcAttribute::Walls => "Add cavity, internal, or external wall insulation",
        EpcAttribute::SecondaryHeating => "Replace room heaters with an efficient main-system alternative",
        EpcAttribute::Roof => "Top up loft insulation to at least 270 mm",
        EpcAttribute::MainHeat => "Upgrade to a high-efficiency condensing boiler or a heat pump",
        EpcAttribute::MainHeatControl => "Fit a programmer, room thermostat, and thermostatic radiator valves",
        EpcAttribute::Lighting => "Fit low-energy lighting in all fixed outlets",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviceItem {
    pub attribute: EpcAttribute,
    pub current_band: EfficiencyBand,
    pub expected_band: EfficiencyBand,
    pub action: String,
    /// Overall EcoGrade if this attribute alone were raised one band.
    pub overall_after: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advice {
    pub listing_id: String,
    pub overall: Option<f64>,
    /// Bands were inferred from neighboring certificates, not this dwelling's own.
    pub features_inferred: bool,
    pub items: Vec<AdviceItem>,
}

/// One item per attribute below "good", ordered by the overall gain from a
/// one-band improvement; ties go to the worse current band, then attribute order.
pub fn advice(snap: &ScoredSnapshot, scorer: &Scorer, id: &str) -> Option<Advice> {
    snap.store.listing(id)?;
    let Some(report) = snap.reports.get(id) else {
        return Some(Advice {
            listing_id: id.to_string(),
            overall: None,
            features_inferred: false,
            items: Vec::new(),
        });
    };
    let mut items: Vec<AdviceItem> = report
        .feature_scores
        .iter()
        .filter_map(|(&attribute, &score)| {
            let current_band = EfficiencyBand::from_score_floor(score);
            if current_band >= EfficiencyBand::Good {
                return None;
            }
            let expected_band = current_band.improved()?;
            let mut features = report.feature_scores.clone();
            features.insert(attribute, expected_band.score());
            let overall_after = scorer.rescore_features(report, &features).ok()?;
            Some(AdviceItem {
                attribute,
                current_band,
                expected_band,
                action: advice_text(attribute).to_string(),
                overall_after,
                gain: overall_after - report.overall,
            })
        })
        .collect();
    items.sort_by(|a, b| {
        b.gain
            .total_cmp(&a.gain)
            .then(a.current_band.cmp(&b.current_band))
            .then(a.attribute.cmp(&b.attribute))
    });
    Some(Advice {
        listing_id: id.to_string(),
        overall: Some(report.overall),
        features_inferred: report.features_inferred,
        items,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplierRow {
    pub listing_id: String,
    pub city: String,
    pub bed_type: Option<u8>,
    pub factor_scores: Option<FactorScores>,
    pub overall: Option<f64>,
    pub leaves: Option<u8>,
    pub co2_low: Option<f64>,
    pub co2_avg: Option<f64>,
    pub co2_high: Option<f64>,
    pub comparison: Comparison,
    /// Label text, or "Coming Soon".
    pub comparison_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplierDashboard {
    pub supplier_id: String,
    pub name: String,
    pub rows: Vec<SupplierRow>,
}

pub fn supplier_dashboard(snap: &ScoredSnapshot, supplier_id: &str) -> Option<SupplierDashboard> {
    let supplier = snap.store.suppliers.iter().find(|s| s.id == supplier_id)?;
    let rows = supplier
        .listing_ids
        .iter()
        .filter_map(|id| snap.store.listing(id))
        .map(|l| {
            let r = snap.reports.get(&l.id);
            let comparison = comparison_for(snap, l, r);
            SupplierRow {
                listing_id: l.id.clone(),
                city: l.city.clone(),
                bed_type: snap.bed_types.get(&l.id).copied().or(l.bedrooms),
                factor_scores: r.map(|r| r.factor_scores),
                overall: r.map(|r| r.overall),
                leaves: r.map(|r| r.leaves),
                co2_low: r.and_then(|r| r.co2_low),
                co2_avg: r.and_then(|r| r.co2_avg),
                co2_high: r.and_then(|r| r.co2_high),
                comparison_text: comparison.text().to_string(),
                comparison,
            }
        })
        .collect();
    Some(SupplierDashboard {
        supplier_id: supplier.id.clone(),
        name: supplier.name.clone(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthSummary {
    /// `YYYY-MM`.
    pub month: String,
    pub bookings: usize,
    pub nights: u64,
    /// Bookings whose listing has no report; excluded from means and totals.
    pub unscored_bookings: usize,
    /// Mean of each factor over bookings where it is present.
    pub factor_means: BTreeMap<Factor, f64>,
    pub overall_mean: Option<f64>,
    /// Change from the previous listed month; absent for the first month or
    /// when either mean is missing.
    pub factor_deltas: BTreeMap<Factor, f64>,
    pub overall_delta: Option<f64>,
    /// Σ co2_avg × nights / 365, tonnes.
    pub co2_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorporateDashboard {
    pub client_id: String,
    pub name: String,
    pub as_of: NaiveDate,
    pub months: Vec<MonthSummary>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Monthly booking summaries for months that ended before `as_of`.
pub fn corporate_dashboard(snap: &ScoredSnapshot, client_id: &str, as_of: NaiveDate) -> Option<CorporateDashboard> {
    let client = snap.store.clients.iter().find(|c| c.id == client_id)?;
    let mut by_month: BTreeMap<NaiveDate, Vec<&crate::store::Booking>> = BTreeMap::new();
    for b in snap
        .store
        .bookings
        .iter()
        .filter(|b| b.corporate_client_id == client_id)
    {
        let Some(start) = b.month_start() else { continue };
        let complete = start.checked_add_months(Months::new(1)).is_some_and(|end| end <= as_of);
        if complete {
            by_month.entry(start).or_default().push(b);
        }
    }
    let mut months: Vec<MonthSummary> = Vec::with_capacity(by_month.len());
    for (start, bookings) in by_month {
        let mut factor_values: BTreeMap<Factor, Vec<f64>> = BTreeMap::new();
        let mut overall = Vec::new();
        let mut co2_total = 0.0;
        let mut unscored = 0;
        for b in &bookings {
            let Some(r) = snap.reports.get(&b.listing_id) else {
                unscored += 1;
                continue;
            };
            for (f, v) in r.factor_scores.present() {
                factor_values.entry(f).or_default().push(v);
            }
            overall.push(r.overall);
            if let Some(c) = r.co2_avg {
                co2_total += c * f64::from(b.nights) / 365.0;
            }
        }
        let factor_means: BTreeMap<Factor, f64> =
            factor_values.iter().filter_map(|(f, v)| Some((*f, mean(v)?))).collect();
        let overall_mean = mean(&overall);
        let (factor_deltas, overall_delta) = match months.last() {
            Some(prev) => (
                factor_means
                    .iter()
                    .filter_map(|(f, m)| Some((*f, m - prev.factor_means.get(f)?)))
                    .collect(),
                overall_mean.zip(prev.overall_mean).map(|(a, b)| a - b),
            ),
            None => (BTreeMap::new(), None),
        };
        months.push(MonthSummary {
            month: start.format("%Y-%m").to_string(),
            bookings: bookings.len(),
            nights: bookings.iter().map(|b| u64::from(b.nights)).sum(),
            unscored_bookings: unscored,
            factor_means,
            overall_mean,
            factor_deltas,
            overall_delta,
            co2_total,
        });
    }
    Some(CorporateDashboard {
        client_id: client.id.clone(),
        name: client.name.clone(),
        as_of,
        months,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn query_parsing() {
        let q = SearchQuery::parse(&params(&[
            ("city", "London"),
            ("beds", "1"),
            ("order", "asc"),
            ("page", "2"),
        ]))
        .unwrap();
        assert_eq!(q.city.as_deref(), Some("London"));
        assert_eq!(q.beds, Some(1));
        assert_eq!(q.order, SortOrder::Asc);
        assert_eq!(q.page, 2);
        assert_eq!(q.per_page, DEFAULT_PER_PAGE);
        for bad in [
            ("beds", "two"),
            ("order", "up"),
            ("page", "0"),
            ("per_page", "1000"),
            ("sort", "price"),
            ("colour", "red"),
        ] {
            assert!(SearchQuery::parse(&params(&[bad])).is_err(), "{bad:?}");
        }
    }
}
