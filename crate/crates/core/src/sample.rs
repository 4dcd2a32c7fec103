//! A small handcrafted claims-handling log used in tests and documentation.
//!
//! Two cases filed by email, activities labelled `A` through `H`, with a
//! categorical `Resource` and numeric `Cost` on each event. Case 2 spans
//! two days, which exercises cross-day elapsed-time arithmetic.

use crate::eventlog::{
    parse_event_log, AttrDef, AttrKind, AttrScope, AttributeSchema, ColumnMapping, EventLog,
};

pub fn claims_csv() -> &'static str {
    "\
case_id,activity,timestamp,Channel,Age,Resource,Cost
1,A,1/1/2017 9:13:00,Email,37,John,15
1,B,1/1/2017 9:14:20,Email,37,Mark,25
1,D,1/1/2017 9:16:00,Email,37,Mary,10
1,F,1/1/2017 9:18:05,Email,37,Kate,20
1,G,1/1/2017 9:18:50,Email,37,John,20
1,H,1/1/2017 9:19:00,Email,37,Kate,15
2,A,2/1/2017 16:55:00,Email,52,John,25
2,D,2/1/2017 17:00:00,Email,52,Mary,25
2,B,3/1/2017 9:00:00,Email,52,Mark,10
2,F,3/1/2017 9:01:50,Email,52,Kate,15
"
}

pub fn claims_mapping() -> ColumnMapping {
    ColumnMapping::new("case_id", "activity", "timestamp", "%d/%m/%Y %H:%M:%S")
}

pub fn claims_schema() -> AttributeSchema {
    AttributeSchema::new(vec![
        AttrDef::new("Channel", AttrKind::Categorical, AttrScope::Case),
        AttrDef::new("Age", AttrKind::Numeric, AttrScope::Case),
        AttrDef::new("Resource", AttrKind::Categorical, AttrScope::Event),
        AttrDef::new("Cost", AttrKind::Numeric, AttrScope::Event),
    ])
}

pub fn claims_log() -> EventLog {
    parse_event_log(claims_csv().as_bytes(), &claims_mapping(), &claims_schema())
        .expect("fixture parses")
        .log
}
