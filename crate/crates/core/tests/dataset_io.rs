//! CSV round trips and sliding-window invariants.

use chrono::{Duration, NaiveDate};
use csvqr_core::dataset::{
    load_csv, make_windows, write_csv, ColumnMapping, SlidingWindowSplit, TimeSeriesRecord,
    YearMonth, TRAIN_MONTHS,
};
use proptest::prelude::*;

fn record_strategy() -> impl Strategy<Value = Vec<(Option<f64>, [f64; 4])>> {
    let row = (
        proptest::option::of(0.0..=1.0f64),
        proptest::array::uniform4(-25.0..25.0f64),
    );
    proptest::collection::vec(row, 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_lossless(rows in record_strategy(), zone in 1u32..11, offset in 0i64..5000) {
        let start = NaiveDate::from_ymd_opt(2012, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap() + Duration::hours(offset);
        let records: Vec<TimeSeriesRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, (power, c))| TimeSeriesRecord {
                timestamp: start + Duration::hours(i as i64),
                zone,
                power: *power,
                u10: c[0],
                v10: c[1],
                u100: c[2],
                v100: c[3],
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wind.csv");
        let schema = ColumnMapping::default();
        write_csv(std::fs::File::create(&path).unwrap(), &records, &schema).unwrap();
        let back = load_csv(&path, &schema).unwrap();
        prop_assert_eq!(back, records);
    }

    #[test]
    fn windows_cover_the_three_preceding_months(year in 2000i32..2040, month in 1u32..=12, span in 0i32..12) {
        let test = YearMonth::new(year, month).unwrap();
        let split = SlidingWindowSplit::for_test_month(test);
        let expected: i64 = (1..=TRAIN_MONTHS).map(|k| test.offset(-k).hours()).sum();
        prop_assert_eq!(split.train_range.hours(), expected);
        prop_assert_eq!(split.train_range.end, split.test_range.start);
        prop_assert_eq!(split.test_range.hours(), test.hours());
        prop_assert_eq!(split.train_months(), vec![test.offset(-3), test.offset(-2), test.offset(-1)]);

        // consecutive splits advance both ranges by exactly one month
        let next = SlidingWindowSplit::for_test_month(test.offset(span).succ());
        let here = SlidingWindowSplit::for_test_month(test.offset(span));
        prop_assert_eq!(next.train_range.start, YearMonth::of(here.train_range.start).succ().start());
        prop_assert_eq!(next.test_range.start, here.test_range.end);
    }
}

#[test]
fn windows_from_data_slide_month_by_month() {
    let first: YearMonth = "2013-03".parse().unwrap();
    let mut records = Vec::new();
    let mut t = first.start();
    while t < "2013-11".parse::<YearMonth>().unwrap().end() {
        records.push(TimeSeriesRecord {
            timestamp: t,
            zone: 1,
            power: Some(0.5),
            u10: 1.0,
            v10: 1.0,
            u100: 2.0,
            v100: 2.0,
        });
        t += Duration::hours(1);
    }
    let splits = make_windows(
        &records,
        "2013-06".parse().unwrap(),
        "2013-11".parse().unwrap(),
    )
    .unwrap();
    assert_eq!(splits.len(), 6);
    for pair in splits.windows(2) {
        assert_eq!(pair[1].test_month, pair[0].test_month.succ());
        assert_eq!(pair[1].train_range.end, pair[0].test_range.end);
    }
    // every training row precedes the test month
    for s in &splits {
        assert!(records
            .iter()
            .filter(|r| s.train_range.contains(r.timestamp))
            .all(|r| r.timestamp < s.test_range.start));
    }
    assert!(make_windows(
        &records,
        "2013-05".parse().unwrap(),
        "2013-06".parse().unwrap()
    )
    .is_err());
}
