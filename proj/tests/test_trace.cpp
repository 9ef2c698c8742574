#include <gtest/gtest.h>

#include <sstream>

#include "rlsol/trace.hpp"
#include "rlsol/verify.hpp"

namespace rlsol {
namespace {

TEST(SessionRecords, ParseSkipsCommentsAndBlankLines) {
  std::istringstream in("# header\n\n1 0.5\n2 -1 frameA\n   \n3 1e-3 b\n");
  const auto recs = parse_session_records(in);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0], (SessionRecord{1, 0.5, std::nullopt}));
  EXPECT_EQ(recs[1], (SessionRecord{2, -1.0, "frameA"}));
  EXPECT_EQ(recs[2], (SessionRecord{3, 1e-3, "b"}));
}

TEST(SessionRecords, CanonicalRoundTripIsByteExact) {
  const std::string canonical = "1 0.1\n2 0.9 A\n10 -0.25 frame_10\n";
  std::istringstream in(canonical);
  EXPECT_EQ(format_session_records(parse_session_records(in)), canonical);
}

TEST(SessionRecords, FormatThenParseIsIdentity) {
  const std::vector<SessionRecord> recs = {{1, 0.1, std::nullopt}, {7, 1.0 / 3.0, "x"}, {9, -2e-300, "y"}};
  std::istringstream in(format_session_records(recs));
  EXPECT_EQ(parse_session_records(in), recs);
}

TEST(SessionRecords, MalformedLinesNameTheLine) {
  std::istringstream too_many("1 0.5\n2 0.5 a b\n");
  try {
    parse_session_records(too_many);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::istringstream bad_number("1 abc\n");
  EXPECT_THROW(parse_session_records(bad_number), InputError);
  std::istringstream bad_step("1.5 0.2\n");
  EXPECT_THROW(parse_session_records(bad_step), InputError);
}

TEST(ConvRecords, ParseAndRoundTrip) {
  const std::string canonical = "1 0\n2 0 S\n7 1\n21 1 T\n";
  std::istringstream in(canonical);
  const auto recs = parse_conv_records(in);
  ASSERT_EQ(recs.size(), 4u);
  EXPECT_TRUE(recs[2].hard_negative);
  EXPECT_EQ(recs[3].sample_ref, "T");
  EXPECT_EQ(format_conv_records(recs), canonical);
  std::istringstream bad_flag("1 2\n");
  EXPECT_THROW(parse_conv_records(bad_flag), InputError);
}

TEST(ConvRecords, ScriptFixtureParses) {
  std::istringstream in(verify::kConvScript);
  EXPECT_EQ(parse_conv_records(in).size(), 11u);
}

TEST(ResolveSample, UnknownReferenceIsInputError) {
  const std::map<std::string, int> table = {{"a", 1}};
  EXPECT_EQ(resolve_sample(table, "a"), 1);
  EXPECT_THROW(resolve_sample(table, "b"), InputError);
}

}  // namespace
}  // namespace rlsol
