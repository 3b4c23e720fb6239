#include <stdio.h>
#include <string.h>
#include "dihedral_closure.h"

static const char *WITNESS =
    "format = \"dihedral-closure-spec/1\"\n"
    "factors = [\"DInf\", \"DInf\"]\n"
    "b = \"b1*b2\"\n"
    "a = \"a1^3*a2^5\"\n";

static const char *PROJECTION =
    "format = \"dihedral-closure-spec/1\"\n"
    "factors = [\"DInf\", \"DInf\"]\n"
    "b = \"b1\"\n"
    "a = \"a1\"\n";

int main(void) {
    DcSpec *spec = NULL;
    DcAnalysis *an = NULL;
    DcVerdictKind kind;
    char *text = NULL;

    if (dc_spec_parse(WITNESS, &spec) != DC_STATUS_OK) return 1;
    if (dc_analyze(spec, 0, 0, &an) != DC_STATUS_OK) return 2;
    if (dc_analysis_verdict(an, &kind) != DC_STATUS_OK || kind != DC_VERDICT_KIND_NOT_VERBALLY_CLOSED) return 3;
    if (dc_analysis_equation(an, &text) != DC_STATUS_OK || strstr(text, "(rhs a 131072)") == NULL) return 4;
    dc_string_free(text);
    dc_analysis_free(an);
    dc_spec_free(spec);

    if (dc_spec_parse(PROJECTION, &spec) != DC_STATUS_OK) return 5;
    if (dc_analyze(spec, 0, 0, &an) != DC_STATUS_OK) return 6;
    if (dc_analysis_retract(an, "a1^4*b2*a2", &text) != DC_STATUS_OK || strcmp(text, "a1^4") != 0) return 7;
    dc_string_free(text);
    if (dc_analysis_equation(an, &text) != DC_STATUS_NOT_AVAILABLE || text != NULL) return 8;
    if (strlen(dc_last_error_message()) == 0) return 9;
    dc_analysis_free(an);
    dc_spec_free(spec);

    if (dc_spec_parse("format = 1", &spec) != DC_STATUS_PARSE_ERROR || spec != NULL) return 10;
    printf("ok %s\n", dc_version());
    return 0;
}
