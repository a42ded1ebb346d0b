/* Compiled as C99: proves the public header needs no C++ compiler. */
#include <stdio.h>
#include <string.h>

#include "bowtie/bowtie_c.h"

static int failures = 0;

static void expect(int ok, const char* what) {
  if (!ok) {
    fprintf(stderr, "FAIL: %s\n", what);
    ++failures;
  }
}

int main(void) {
  expect(bt_version() != NULL && strlen(bt_version()) > 0, "version string");
  expect(bt_last_error() != NULL, "error string non-NULL before any failure");

  bt_graph* g = NULL;
  bt_status st = bt_graph_load("generic", "/no/such/file.csv", NULL, NULL, &g);
  expect(st == BT_ERROR_PARSE, "missing file maps to the parse status");
  expect(g == NULL, "handle untouched on failure");
  expect(strlen(bt_last_error()) > 0, "error message set after failure");

  st = bt_graph_load(NULL, "/tmp/x.csv", NULL, NULL, &g);
  expect(st == BT_ERROR_VALIDATION, "NULL kind maps to the validation status");

  expect(bt_graph_node_count(NULL) == 0, "node count of NULL handle");
  bt_graph_free(NULL);
  bt_string_free(NULL);

  char* out = NULL;
  st = bt_pipeline_run("{\"mystery\": 1}", &out);
  expect(st == BT_ERROR_PARSE, "unknown config key maps to the parse status");
  expect(out == NULL, "report pointer untouched on failure");

  if (failures == 0) printf("C header check passed\n");
  return failures == 0 ? 0 : 1;
}
