#include "sqlens/errors.hpp"

namespace sqlens {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::missing_file: return "MissingFile";
    case Errc::malformed_catalog: return "MalformedCatalog";
    case Errc::unknown_format: return "UnknownFormat";
    case Errc::storage_full: return "StorageFull";
    case Errc::duplicate_key: return "DuplicateKey";
    case Errc::empty_store: return "EmptyStore";
    case Errc::database_unreachable: return "DatabaseUnreachable";
    case Errc::empty_link: return "EmptyLink";
    case Errc::unparseable_sql: return "UnparseableSql";
    case Errc::missing_section: return "MissingSection";
    case Errc::transport: return "Transport";
    case Errc::auth_failure: return "AuthFailure";
    case Errc::transcript_miss: return "TranscriptMiss";
    case Errc::no_sql_found: return "NoSqlFound";
    case Errc::not_rows: return "NotRows";
    case Errc::missing_gold: return "MissingGold";
    case Errc::plan_parse: return "PlanParse";
    case Errc::verdict_parse: return "VerdictParse";
    case Errc::critique_parse: return "CritiqueParse";
    case Errc::invalid_action: return "InvalidAction";
    case Errc::sandbox_violation: return "SandboxViolation";
    case Errc::step_cap_exceeded: return "StepCapExceeded";
    case Errc::expert_failure: return "ExpertFailure";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::usage: return "Usage";
  }
  return "UnknownError";
}

}  // namespace sqlens
