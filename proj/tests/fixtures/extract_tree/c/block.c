/* header
 * more
 */
int main() { return 0; }
