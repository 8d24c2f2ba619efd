public class Acme {
  int check(int x) {
    return x;
  }

  int other() {
    return 7;
  }
}
