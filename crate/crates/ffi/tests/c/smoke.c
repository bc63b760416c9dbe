#include <math.h>
#include <stdio.h>
#include "fedquant.h"

int main(void) {
    double u[5] = {1.0, -0.5, 0.0, 0.0, 2.5};
    FqEncoder *enc = NULL;
    if (fq_encoder_new(0.5, FQ_QUANTIZER_ROUND, FQ_CODE_GAMMA, 7, &enc) != FQ_STATUS_OK) return 1;
    FqBuffer *buf = NULL;
    if (fq_encode(enc, u, 5, &buf) != FQ_STATUS_OK) return 2;
    FqVector *v = NULL;
    if (fq_decode(fq_buffer_data(buf), fq_buffer_len(buf), &v) != FQ_STATUS_OK) return 3;
    if (fq_vector_len(v) != 5) return 4;
    for (size_t i = 0; i < 5; i++) {
        if (fabs(fq_vector_data(v)[i] - u[i]) > 0.0) return 5;
    }
    uint8_t junk[3] = {0xff, 0xff, 0xff};
    FqVector *bad = NULL;
    if (fq_decode(junk, 3, &bad) != FQ_STATUS_CORRUPT) return 6;
    printf("%s\n", fq_last_error());
    fq_vector_free(v);
    fq_buffer_free(buf);
    fq_encoder_free(enc);
    return 0;
}
