use super::LeaderboardRow;

/// Pretty JSON array of leaderboard rows; the exact bytes served by the API
/// and printed by the CLI.
pub fn leaderboard_json(rows: &[LeaderboardRow]) -> String {
    serde_json::to_string_pretty(rows).expect("leaderboard rows always serialize")
}

/// CSV with columns `external_id,org_risk,asset_count,unit_count,gap_count`.
pub fn leaderboard_csv(rows: &[LeaderboardRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["external_id", "org_risk", "asset_count", "unit_count", "gap_count"])
        .expect("in-memory csv write");
    for row in rows {
        writer
            .write_record([
                row.external_id.clone(),
                row.org_risk.to_string(),
                row.asset_count.to_string(),
                row.unit_count.to_string(),
                row.gap_count.to_string(),
            ])
            .expect("in-memory csv write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}
